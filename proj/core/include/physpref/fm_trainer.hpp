// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "physpref/denoiser.hpp"
#include "physpref/flow.hpp"
#include "physpref/optim.hpp"

namespace physpref {

/// A clean latent with its conditioning.
struct LatentExample {
    std::string id;
    Tensor4 x1;
    ConditioningPack cond;
};

struct FMConfig {
    int steps = 200;
    int batch = 8;
    AdamWConfig optim{1e-3, 0.9, 0.999, 1e-8, 0.0};
    TimestepSpec timesteps = TimestepSpec::logit_normal(0.0, 1.0);
    std::uint64_t seed = 0;
    int log_every = 10;

    Json to_json() const;
    static FMConfig from_json(const Json& j);
};

struct FMLogPoint {
    int step = 0;
    double loss = 0.0;  // mean over the steps since the previous point
};

struct FMReport {
    std::vector<FMLogPoint> log;
    int steps = 0;
};

/// Flow-matching pretraining of theta (context MLP included). Each step
/// averages `batch` examples drawn with replacement; noise, timesteps and
/// example choice come from SplitMix64(derive_seed(seed, "fm")).
FMReport train_fm(ToyDenoiser& model, std::span<const LatentExample> data, const FMConfig& config);

}  // namespace physpref
