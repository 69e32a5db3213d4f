// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "physpref/error.hpp"

namespace physpref {

namespace {

constexpr char kMagic[8] = {'P', 'P', 'C', 'K', 'P', 'T', '0', '1'};

void put_u64(std::string& out, std::uint64_t v, int bytes = 8) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_vector(std::string& out, const Eigen::VectorXd& v) {
    put_u64(out, static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v(i));
}

class Reader {
public:
    Reader(std::string_view bytes, const std::string& source) : bytes_(bytes), source_(source) {}

    std::uint64_t u64(int n = 8) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view take(std::size_t n) {
        need(n);
        const auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    Eigen::VectorXd vector() {
        const std::uint64_t n = u64();
        if (n > (bytes_.size() - pos_) / 8) {
            throw ValidationError(source_ + ": vector length " + std::to_string(n) + " exceeds file size");
        }
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f64();
        return v;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw ValidationError(source_ + ": truncated checkpoint at byte " + std::to_string(pos_));
        }
    }

    std::string_view bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

}  // namespace

Checkpoint Checkpoint::capture(const ToyDenoiser& model, const SplitMix64& rng, Json meta) {
    Checkpoint c;
    c.config = model.config();
    c.config.adapter_alpha = model.adapter().alpha();
    c.meta = std::move(meta);
    c.theta = model.theta();
    c.adapter = model.adapter().factors();
    c.rng_state = rng.state();
    c.rng_cached = rng.cached_normal();
    return c;
}

ToyDenoiser Checkpoint::model() const {
    ToyDenoiser m(config, 0);
    if (m.theta().size() != theta.size() || m.adapter().factors().size() != adapter.size()) {
        throw ValidationError("checkpoint vectors do not match the layout implied by its config");
    }
    m.theta() = theta;
    m.adapter().factors() = adapter;
    return m;
}

SplitMix64 Checkpoint::rng() const {
    SplitMix64 r(0);
    r.restore(rng_state, rng_cached);
    return r;
}

std::string Checkpoint::serialize() const {
    std::string out(kMagic, sizeof kMagic);
    put_u64(out, kVersion, 4);
    const std::string header = Json{{"config", config.to_json()}, {"meta", meta}}.dump();
    put_u64(out, header.size(), 4);
    out += header;
    put_vector(out, theta);
    put_vector(out, adapter);
    put_u64(out, rng_state);
    out.push_back(rng_cached ? '\1' : '\0');
    put_f64(out, rng_cached.value_or(0.0));
    return out;
}

Checkpoint Checkpoint::parse(std::string_view bytes, const std::string& source) {
    Reader r(bytes, source);
    if (r.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
        throw ValidationError(source + ": not a physpref checkpoint");
    }
    const auto version = r.u64(4);
    if (version != kVersion) {
        throw ValidationError(source + ": unsupported checkpoint version " + std::to_string(version));
    }
    const auto header_len = r.u64(4);
    Json header;
    try {
        header = Json::parse(r.take(static_cast<std::size_t>(header_len)));
    } catch (const Json::parse_error& e) {
        throw ValidationError(source + ": bad checkpoint header: " + e.what());
    }
    Checkpoint c;
    c.config = DenoiserConfig::from_json(header.at("config"));
    c.meta = header.value("meta", Json::object());
    c.theta = r.vector();
    c.adapter = r.vector();
    c.rng_state = r.u64();
    const bool has_cached = r.u64(1) != 0;
    const double cached = r.f64();
    if (has_cached) c.rng_cached = cached;
    if (!r.done()) {
        throw ValidationError(source + ": trailing bytes after checkpoint");
    }
    return c;
}

void Checkpoint::write(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Checkpoint Checkpoint::read(const std::filesystem::path& path) {
    return parse(read_text_file(path), path.string());
}

}  // namespace physpref
