// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "physpref/rng.hpp"

namespace physpref {

struct AdaptedMatrix {
    std::string name;
    int m = 0;  // rows of the adapted weight
    int n = 0;  // cols of the adapted weight
    std::size_t a_offset = 0;  // A is m x r, column-major
    std::size_t b_offset = 0;  // B is r x n, column-major
};

/// Low-rank increment phi over a set of weight matrices: W + (alpha / r) A B.
/// All factors live in one flat vector so optimizers and checkpoints treat
/// phi as a single parameter block.
class AdapterIncrement {
public:
    AdapterIncrement() = default;
    AdapterIncrement(const std::vector<std::pair<std::string, std::pair<int, int>>>& shapes, int rank = 16,
                     double alpha = 16.0);

    int rank() const noexcept { return rank_; }
    double alpha() const noexcept { return alpha_; }
    void set_alpha(double alpha) noexcept { alpha_ = alpha; }

    /// alpha / r while enabled, 0 inside a ZeroAdapterScope.
    double scale() const noexcept { return enabled_ ? alpha_ / rank_ : 0.0; }
    bool enabled() const noexcept { return enabled_; }

    const std::vector<AdaptedMatrix>& matrices() const noexcept { return matrices_; }
    std::size_t index_of(const std::string& name) const;

    Eigen::VectorXd& factors() noexcept { return factors_; }
    const Eigen::VectorXd& factors() const noexcept { return factors_; }

    Eigen::Map<Eigen::MatrixXd> A(std::size_t i);
    Eigen::Map<const Eigen::MatrixXd> A(std::size_t i) const;
    Eigen::Map<Eigen::MatrixXd> B(std::size_t i);
    Eigen::Map<const Eigen::MatrixXd> B(std::size_t i) const;

    /// scale() * A B for matrix i.
    Eigen::MatrixXd increment(std::size_t i) const;

    /// A ~ N(0, 1/m), B = 0, so the increment starts exactly at zero.
    void initialize(SplitMix64& rng);

    /// FNV-1a over the factor bytes, rank and alpha.
    std::uint64_t fingerprint() const noexcept;

private:
    friend class ZeroAdapterScope;

    int rank_ = 16;
    double alpha_ = 16.0;
    bool enabled_ = true;
    std::vector<AdaptedMatrix> matrices_;
    Eigen::VectorXd factors_;
};

/// Reference-by-zeroing: while alive, the adapter contributes nothing and
/// forwards see the base weights. Factors are never copied; restore()
/// re-enables the increment and checks the factors were left untouched,
/// raising IntegrityError otherwise.
class ZeroAdapterScope {
public:
    explicit ZeroAdapterScope(AdapterIncrement& adapter);
    ~ZeroAdapterScope() noexcept(false);

    ZeroAdapterScope(const ZeroAdapterScope&) = delete;
    ZeroAdapterScope& operator=(const ZeroAdapterScope&) = delete;

    void restore();

private:
    AdapterIncrement* adapter_;
    std::uint64_t fingerprint_;
    bool restored_ = false;
};

}  // namespace physpref
