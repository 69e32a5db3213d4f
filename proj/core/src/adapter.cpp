// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/adapter.hpp"

#include <cmath>
#include <cstring>
#include <exception>
#include <string_view>

#include "physpref/error.hpp"

namespace physpref {

AdapterIncrement::AdapterIncrement(const std::vector<std::pair<std::string, std::pair<int, int>>>& shapes,
                                   int rank, double alpha)
    : rank_(rank), alpha_(alpha) {
    if (rank < 1) {
        throw ValidationError("adapter rank must be >= 1");
    }
    std::size_t offset = 0;
    for (const auto& [name, mn] : shapes) {
        AdaptedMatrix am{name, mn.first, mn.second, 0, 0};
        am.a_offset = offset;
        offset += static_cast<std::size_t>(am.m) * rank;
        am.b_offset = offset;
        offset += static_cast<std::size_t>(rank) * am.n;
        matrices_.push_back(std::move(am));
    }
    factors_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

std::size_t AdapterIncrement::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < matrices_.size(); ++i) {
        if (matrices_[i].name == name) return i;
    }
    throw ValidationError("no adapted matrix named '" + name + "'");
}

Eigen::Map<Eigen::MatrixXd> AdapterIncrement::A(std::size_t i) {
    const auto& am = matrices_.at(i);
    return {factors_.data() + am.a_offset, am.m, rank_};
}

Eigen::Map<const Eigen::MatrixXd> AdapterIncrement::A(std::size_t i) const {
    const auto& am = matrices_.at(i);
    return {factors_.data() + am.a_offset, am.m, rank_};
}

Eigen::Map<Eigen::MatrixXd> AdapterIncrement::B(std::size_t i) {
    const auto& am = matrices_.at(i);
    return {factors_.data() + am.b_offset, rank_, am.n};
}

Eigen::Map<const Eigen::MatrixXd> AdapterIncrement::B(std::size_t i) const {
    const auto& am = matrices_.at(i);
    return {factors_.data() + am.b_offset, rank_, am.n};
}

Eigen::MatrixXd AdapterIncrement::increment(std::size_t i) const { return scale() * (A(i) * B(i)); }

void AdapterIncrement::initialize(SplitMix64& rng) {
    factors_.setZero();
    for (std::size_t i = 0; i < matrices_.size(); ++i) {
        auto a = A(i);
        const double stddev = 1.0 / std::sqrt(static_cast<double>(matrices_[i].m));
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            for (Eigen::Index r = 0; r < a.rows(); ++r) a(r, c) = rng.normal() * stddev;
        }
    }
}

std::uint64_t AdapterIncrement::fingerprint() const noexcept {
    const std::string_view bytes(reinterpret_cast<const char*>(factors_.data()),
                                 static_cast<std::size_t>(factors_.size()) * sizeof(double));
    std::uint64_t h = fnv1a64(bytes);
    h ^= static_cast<std::uint64_t>(rank_) * 0x100000001B3ULL;
    std::uint64_t alpha_bits;
    static_assert(sizeof alpha_bits == sizeof alpha_);
    std::memcpy(&alpha_bits, &alpha_, sizeof alpha_bits);
    return h ^ (alpha_bits + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2));
}

ZeroAdapterScope::ZeroAdapterScope(AdapterIncrement& adapter)
    : adapter_(&adapter), fingerprint_(adapter.fingerprint()) {
    if (!adapter.enabled_) {
        throw IntegrityError("adapter is already zeroed; nested reference scopes are not allowed");
    }
    adapter_->enabled_ = false;
}

ZeroAdapterScope::~ZeroAdapterScope() noexcept(false) {
    if (restored_) return;
    if (std::uncaught_exceptions() > 0) {
        adapter_->enabled_ = true;
        return;
    }
    restore();
}

void ZeroAdapterScope::restore() {
    if (restored_) return;
    restored_ = true;
    adapter_->enabled_ = true;
    if (adapter_->fingerprint() != fingerprint_) {
        throw IntegrityError("adapter factors changed while zeroed; restore does not match the snapshot");
    }
}

}  // namespace physpref
