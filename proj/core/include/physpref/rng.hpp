// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>

namespace physpref {

/// SplitMix64 with the standard Vigna finalizer.
///
/// Every seeded choice in the toolkit (split shuffles, quota draws, noise,
/// timesteps, toy clip parameters) goes through this generator so that the
/// same seed produces the same stream in any language that reimplements the
/// few lines below. Derived quantities are pinned too:
///  - uniform01: top 53 bits scaled by 2^-53, range [0, 1)
///  - bounded(n): next_u64() % n
///  - normal: Box-Muller on (1 - u1, u2), cosine branch first, sine cached
///  - shuffle: Fisher-Yates from the back, j = bounded(i + 1)
class SplitMix64 {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next_u64() noexcept {
        std::uint64_t z = (state_ += kGamma);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t operator()() noexcept { return next_u64(); }

    double uniform01() noexcept;
    std::uint64_t bounded(std::uint64_t n);
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }
    double normal() noexcept;
    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(bounded(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

    std::uint64_t state() const noexcept { return state_; }
    std::optional<double> cached_normal() const noexcept { return cached_normal_; }
    void restore(std::uint64_t state, std::optional<double> cached) noexcept {
        state_ = state;
        cached_normal_ = cached;
    }

    // Matches the STL UniformRandomBitGenerator requirements.
    using result_type = std::uint64_t;
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

private:
    std::uint64_t state_;
    std::optional<double> cached_normal_;
};

/// 64-bit FNV-1a over the bytes of `text`.
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// Child seed for a named sub-stream: first output of SplitMix64(seed ^ fnv1a64(tag)).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept;

/// Child seed for an indexed sub-stream: first output of SplitMix64(seed + (index + 1) * gamma).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

}  // namespace physpref
