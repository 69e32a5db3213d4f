// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "physpref/denoiser.hpp"
#include "physpref/io.hpp"
#include "physpref/rng.hpp"

namespace physpref {

/// Binary layout, all integers and doubles little-endian:
///   "PPCKPT01"                     8 bytes
///   u32 format version (1)
///   u32 header length, header      compact JSON {"config", "meta"}
///   u64 n_theta, n_theta f64
///   u64 n_phi, n_phi f64
///   u64 rng state, u8 has_cached, f64 cached normal (0 when absent)
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    DenoiserConfig config;
    Json meta = Json::object();
    Eigen::VectorXd theta;
    Eigen::VectorXd adapter;
    std::uint64_t rng_state = 0;
    std::optional<double> rng_cached;

    static Checkpoint capture(const ToyDenoiser& model, const SplitMix64& rng, Json meta = Json::object());

    /// Rebuilds the model; the adapter keeps its alpha from the config.
    ToyDenoiser model() const;
    SplitMix64 rng() const;

    std::string serialize() const;
    static Checkpoint parse(std::string_view bytes, const std::string& source = "checkpoint");

    void write(const std::filesystem::path& path) const;
    static Checkpoint read(const std::filesystem::path& path);
};

}  // namespace physpref
