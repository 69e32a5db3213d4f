// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "physpref/io.hpp"
#include "physpref/rng.hpp"
#include "physpref/tensor.hpp"

namespace physpref {

/// x_t = tau * x1 + (1 - tau) * x0.
Tensor4 interpolate(const Tensor4& x0, const Tensor4& x1, double tau);

/// v = x1 - x0.
Tensor4 velocity_target(const Tensor4& x0, const Tensor4& x1);

/// Discrete timestep and the flow coefficient it maps to. t_disc = 999 is
/// the noisiest step; tau = 1 - t_disc / 1000, so tau = 0 would be pure noise.
struct TimestepDraw {
    int t_disc = 0;
    double tau = 1.0;
};

double tau_of(int t_disc);

enum class TimestepMode { LogitNormal, UniformWindow };

struct TimestepSpec {
    TimestepMode mode = TimestepMode::UniformWindow;
    double mu = 0.0;
    double sigma = 1.0;
    int lo = 901;
    int hi = 999;

    static TimestepSpec logit_normal(double mu = 0.0, double sigma = 1.0);
    static TimestepSpec window(int lo = 901, int hi = 999);

    Json to_json() const;
    static TimestepSpec from_json(const Json& j);
};

/// Logit-normal: z ~ N(mu, sigma), t_disc = round(1000 * (1 - sigmoid(z)))
/// clamped to [0, 999], tau from t_disc. Uniform window: t_disc = lo +
/// next_u64() % (hi - lo + 1). Each draw consumes one normal or one u64.
TimestepDraw sample_timestep(SplitMix64& rng, const TimestepSpec& spec);

using VelocityField = std::function<Tensor4(const Tensor4& x, double tau)>;

/// Explicit Euler for dx/dtau = u(x, tau) from tau = 0 to 1 on n_steps
/// uniform steps. Throws NumericalError naming the step on a non-finite state.
Tensor4 euler_sample(const VelocityField& u, const Tensor4& x0, int n_steps);

/// Standard normal tensor with the given shape.
Tensor4 gaussian_like(const Shape4& shape, SplitMix64& rng, Semantics tag = Semantics::Noise);

}  // namespace physpref
