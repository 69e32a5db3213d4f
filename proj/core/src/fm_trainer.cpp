// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/fm_trainer.hpp"

#include "physpref/error.hpp"

namespace physpref {

Json FMConfig::to_json() const {
    return {{"steps", steps},           {"batch", batch}, {"optim", optim.to_json()},
            {"timesteps", timesteps.to_json()}, {"seed", seed},   {"log_every", log_every}};
}

FMConfig FMConfig::from_json(const Json& j) {
    FMConfig c;
    c.steps = j.value("steps", c.steps);
    c.batch = j.value("batch", c.batch);
    if (j.contains("optim")) c.optim = AdamWConfig::from_json(j.at("optim"), c.optim);
    if (j.contains("timesteps")) c.timesteps = TimestepSpec::from_json(j.at("timesteps"));
    c.seed = j.value("seed", c.seed);
    c.log_every = j.value("log_every", c.log_every);
    if (c.steps < 0 || c.batch < 1 || c.log_every < 1) {
        throw ValidationError("fm config: steps >= 0, batch >= 1 and log_every >= 1 required");
    }
    return c;
}

FMReport train_fm(ToyDenoiser& model, std::span<const LatentExample> data, const FMConfig& config) {
    if (data.empty()) {
        throw ValidationError("train_fm: empty dataset");
    }
    SplitMix64 rng(derive_seed(config.seed, "fm"));
    AdamW opt(model.theta().size(), config.optim);
    Gradients grads = model.make_gradients();
    const GradTargets targets{true, true, false};
    FMReport report;
    double window = 0.0;
    int window_n = 0;
    for (int step = 1; step <= config.steps; ++step) {
        grads.zero();
        double step_loss = 0.0;
        for (int b = 0; b < config.batch; ++b) {
            const auto& ex = data[rng.bounded(data.size())];
            const Tensor4 x0 = gaussian_like(ex.x1.shape(), rng);
            const TimestepDraw t = sample_timestep(rng, config.timesteps);
            const Tensor4 xt = interpolate(x0, ex.x1, t.tau);
            const Tensor4 v = velocity_target(x0, ex.x1);
            step_loss += fm_loss_and_grad(model, xt, ex.cond, t.tau, v, targets, grads, 1.0 / config.batch);
        }
        step_loss /= config.batch;
        if (!grads.base.allFinite()) {
            throw NumericalError("train_fm: non-finite gradient at step " + std::to_string(step));
        }
        opt.step(model.theta(), grads.base);
        window += step_loss;
        ++window_n;
        if (step % config.log_every == 0 || step == config.steps) {
            report.log.push_back({step, window / window_n});
            window = 0.0;
            window_n = 0;
        }
    }
    report.steps = config.steps;
    return report;
}

}  // namespace physpref
