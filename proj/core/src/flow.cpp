// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/flow.hpp"

#include <algorithm>
#include <cmath>

#include "physpref/error.hpp"

namespace physpref {

Tensor4 interpolate(const Tensor4& x0, const Tensor4& x1, double tau) {
    require_same_shape(x0, x1, "interpolate");
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw ValidationError("interpolate: tau outside [0, 1]");
    }
    return axpby(1.0 - tau, x0, tau, x1, Semantics::Interpolant);
}

Tensor4 velocity_target(const Tensor4& x0, const Tensor4& x1) {
    require_same_shape(x0, x1, "velocity_target");
    return axpby(-1.0, x0, 1.0, x1, Semantics::Velocity);
}

double tau_of(int t_disc) { return 1.0 - static_cast<double>(t_disc) / 1000.0; }

TimestepSpec TimestepSpec::logit_normal(double mu, double sigma) {
    TimestepSpec s;
    s.mode = TimestepMode::LogitNormal;
    s.mu = mu;
    s.sigma = sigma;
    return s;
}

TimestepSpec TimestepSpec::window(int lo, int hi) {
    if (lo < 0 || hi > 999 || lo > hi) {
        throw ValidationError("timestep window must satisfy 0 <= lo <= hi <= 999");
    }
    TimestepSpec s;
    s.mode = TimestepMode::UniformWindow;
    s.lo = lo;
    s.hi = hi;
    return s;
}

Json TimestepSpec::to_json() const {
    if (mode == TimestepMode::LogitNormal) {
        return {{"mode", "logit_normal"}, {"mu", mu}, {"sigma", sigma}};
    }
    return {{"mode", "uniform_window"}, {"lo", lo}, {"hi", hi}};
}

TimestepSpec TimestepSpec::from_json(const Json& j) {
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "logit_normal") {
        return logit_normal(j.value("mu", 0.0), j.value("sigma", 1.0));
    }
    if (mode == "uniform_window") {
        return window(j.value("lo", 901), j.value("hi", 999));
    }
    throw ValidationError("unknown timestep mode '" + mode + "'");
}

TimestepDraw sample_timestep(SplitMix64& rng, const TimestepSpec& spec) {
    TimestepDraw d;
    if (spec.mode == TimestepMode::UniformWindow) {
        const auto span = static_cast<std::uint64_t>(spec.hi - spec.lo + 1);
        d.t_disc = spec.lo + static_cast<int>(rng.next_u64() % span);
    } else {
        const double z = rng.normal(spec.mu, spec.sigma);
        const double tau = 1.0 / (1.0 + std::exp(-z));
        d.t_disc = std::clamp(static_cast<int>(std::lround(1000.0 * (1.0 - tau))), 0, 999);
    }
    d.tau = tau_of(d.t_disc);
    return d;
}

Tensor4 euler_sample(const VelocityField& u, const Tensor4& x0, int n_steps) {
    if (n_steps < 1) {
        throw ValidationError("euler_sample: n_steps must be >= 1");
    }
    Tensor4 x = x0;
    x.set_tag(Semantics::Interpolant);
    const double dt = 1.0 / n_steps;
    for (int k = 0; k < n_steps; ++k) {
        const double tau = static_cast<double>(k) / n_steps;
        const Tensor4 v = u(x, tau);
        require_same_shape(v, x, "euler_sample");
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt * v[i];
        if (!x.all_finite()) {
            throw NumericalError("euler_sample: non-finite state after step " + std::to_string(k) + " of " +
                                 std::to_string(n_steps));
        }
    }
    x.set_tag(Semantics::Clean);
    return x;
}

Tensor4 gaussian_like(const Shape4& shape, SplitMix64& rng, Semantics tag) {
    Tensor4 out(shape, tag);
    for (auto& v : out.values()) v = rng.normal();
    return out;
}

}  // namespace physpref
