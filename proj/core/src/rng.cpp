// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/rng.hpp"

#include <cmath>
#include <numbers>

#include "physpref/error.hpp"

namespace physpref {

double SplitMix64::uniform01() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t SplitMix64::bounded(std::uint64_t n) {
    if (n == 0) {
        throw ValidationError("SplitMix64::bounded: empty range");
    }
    return next_u64() % n;
}

double SplitMix64::normal() noexcept {
    if (cached_normal_) {
        const double z = *cached_normal_;
        cached_normal_.reset();
        return z;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_normal_ = radius * std::sin(angle);
    return radius * std::cos(angle);
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const char c : text) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept {
    SplitMix64 rng(seed ^ fnv1a64(tag));
    return rng.next_u64();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    SplitMix64 rng(seed + (index + 1) * SplitMix64::kGamma);
    return rng.next_u64();
}

}  // namespace physpref
