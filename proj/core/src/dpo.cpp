// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "physpref/error.hpp"

namespace physpref {

double softplus(double x) noexcept {
    if (x > 0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

DpoLoss dpo_loss(double mse_pi_w, double mse_pi_l, double mse_ref_w, double mse_ref_l, double beta) {
    DpoLoss out;
    out.delta = (mse_pi_l - mse_pi_w) - (mse_ref_l - mse_ref_w);
    const double z = beta * out.delta;
    out.loss = softplus(-z);
    // sigmoid(-z) evaluated on the branch that cannot overflow.
    const double sig_neg = z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
    out.dloss_ddelta = -beta * sig_neg;
    return out;
}

namespace {

void check_pair(const DpoExample& ex, const Tensor4& eps_w, const Tensor4& eps_l) {
    require_same_shape(ex.x1_w, ex.x1_l, "preference pair " + ex.key);
    require_same_shape(ex.x1_w, eps_w, "winner noise");
    require_same_shape(ex.x1_l, eps_l, "loser noise");
}

}  // namespace

PairMse pair_mse(const ToyDenoiser& model, const DpoExample& ex, const Tensor4& eps_w, const Tensor4& eps_l,
                 double tau) {
    check_pair(ex, eps_w, eps_l);
    PairMse out;
    out.w = fm_loss(model, interpolate(eps_w, ex.x1_w, tau), ex.cond, tau, velocity_target(eps_w, ex.x1_w));
    out.l = fm_loss(model, interpolate(eps_l, ex.x1_l, tau), ex.cond, tau, velocity_target(eps_l, ex.x1_l));
    return out;
}

PairEval evaluate_pair(ToyDenoiser& model, const DpoExample& ex, const Tensor4& eps_w, const Tensor4& eps_l,
                       double tau, double beta) {
    PairEval out;
    out.pi = pair_mse(model, ex, eps_w, eps_l, tau);
    {
        ZeroAdapterScope zero(model.adapter());
        out.ref = pair_mse(model, ex, eps_w, eps_l, tau);
        zero.restore();
    }
    out.dpo = dpo_loss(out.pi.w, out.pi.l, out.ref.w, out.ref.l, beta);
    return out;
}

PairEval dpo_pair_loss_and_grad(ToyDenoiser& model, const DpoExample& ex, const Tensor4& eps_w,
                                const Tensor4& eps_l, double tau, double beta, const GradTargets& targets,
                                Gradients& grads, double weight) {
    check_pair(ex, eps_w, eps_l);
    const Tensor4 xt_w = interpolate(eps_w, ex.x1_w, tau);
    const Tensor4 xt_l = interpolate(eps_l, ex.x1_l, tau);
    const Tensor4 v_w = velocity_target(eps_w, ex.x1_w);
    const Tensor4 v_l = velocity_target(eps_l, ex.x1_l);

    PairEval out;
    {
        ZeroAdapterScope zero(model.adapter());
        out.ref.w = fm_loss(model, xt_w, ex.cond, tau, v_w);
        out.ref.l = fm_loss(model, xt_l, ex.cond, tau, v_l);
        zero.restore();
    }
    ForwardTape tape_w, tape_l;
    const Tensor4 u_w = model.forward(xt_w, ex.cond, tau, &tape_w);
    const Tensor4 u_l = model.forward(xt_l, ex.cond, tau, &tape_l);
    out.pi.w = fm_loss(u_w, v_w);
    out.pi.l = fm_loss(u_l, v_l);
    out.dpo = dpo_loss(out.pi.w, out.pi.l, out.ref.w, out.ref.l, beta);
    if (!std::isfinite(out.dpo.loss)) {
        throw NumericalError("non-finite DPO loss on pair " + ex.key);
    }

    // d delta / d mse_pi_w = -1, d delta / d mse_pi_l = +1.
    const double g = weight * out.dpo.dloss_ddelta;
    const double k = 2.0 / static_cast<double>(u_w.size());
    Tensor4 du(u_w.shape());
    for (std::size_t i = 0; i < du.size(); ++i) du[i] = -g * k * (u_w[i] - v_w[i]);
    model.backward(tape_w, du, targets, grads);
    for (std::size_t i = 0; i < du.size(); ++i) du[i] = g * k * (u_l[i] - v_l[i]);
    model.backward(tape_l, du, targets, grads);
    return out;
}

void DPOConfig::validate() const {
    if (!(beta > 0.0)) throw ValidationError("dpo: beta must be positive");
    if (t_lo < 0 || t_hi > 999 || t_lo > t_hi) throw ValidationError("dpo: timestep window must lie in [0, 999]");
    if (micro_batch < 1 || grad_accum < 1) throw ValidationError("dpo: micro_batch and grad_accum must be >= 1");
    if (epochs < 0) throw ValidationError("dpo: epochs must be >= 0");
    if (eval_every < 1) throw ValidationError("dpo: eval_every must be >= 1");
}

Json DPOConfig::to_json() const {
    return {{"beta", beta},
            {"t_window", {t_lo, t_hi}},
            {"optim", optim.to_json()},
            {"micro_batch", micro_batch},
            {"grad_accum", grad_accum},
            {"epochs", epochs},
            {"seed", seed},
            {"eval_every", eval_every},
            {"paired_noise", paired_noise},
            {"train_context_mlp", train_context_mlp}};
}

DPOConfig DPOConfig::from_json(const Json& j) {
    DPOConfig c;
    c.beta = j.value("beta", c.beta);
    if (j.contains("t_window")) {
        const auto w = j.at("t_window").get<std::vector<int>>();
        if (w.size() != 2) throw ValidationError("dpo: t_window must be [lo, hi]");
        c.t_lo = w[0];
        c.t_hi = w[1];
    }
    if (j.contains("optim")) c.optim = AdamWConfig::from_json(j.at("optim"), c.optim);
    if (j.contains("lr")) c.optim.lr = j.at("lr").get<double>();
    c.micro_batch = j.value("micro_batch", c.micro_batch);
    c.grad_accum = j.value("grad_accum", c.grad_accum);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.paired_noise = j.value("paired_noise", c.paired_noise);
    c.train_context_mlp = j.value("train_context_mlp", c.train_context_mlp);
    c.validate();
    return c;
}

std::int64_t steps_per_epoch(std::size_t n_pairs, const DPOConfig& config) {
    return static_cast<std::int64_t>(n_pairs) / config.effective_batch();
}

Json to_json(const TrajectoryPoint& p) {
    return {{"step", p.step}, {"mean_margin", p.mean_margin}, {"loss", p.loss}, {"accuracy", p.accuracy}};
}

TrajectoryPoint trajectory_point_from_json(const Json& j) {
    TrajectoryPoint p;
    p.step = j.at("step").get<std::int64_t>();
    p.mean_margin = j.at("mean_margin").get<double>();
    p.loss = j.at("loss").get<double>();
    p.accuracy = j.value("accuracy", 0.0);
    return p;
}

ValidationSet make_validation_set(std::vector<DpoExample> pairs, std::uint64_t seed, int t_lo, int t_hi) {
    ValidationSet v;
    v.pairs = std::move(pairs);
    SplitMix64 rng(derive_seed(seed, "validation"));
    const TimestepSpec spec = TimestepSpec::window(t_lo, t_hi);
    for (const auto& p : v.pairs) {
        v.eps.push_back(gaussian_like(p.x1_w.shape(), rng));
        v.tau.push_back(sample_timestep(rng, spec).tau);
    }
    return v;
}

TrajectoryPoint evaluate_validation(ToyDenoiser& model, const ValidationSet& val, double beta, std::int64_t step) {
    TrajectoryPoint p;
    p.step = step;
    if (val.pairs.empty()) return p;
    double margin = 0.0, loss = 0.0;
    std::size_t wins = 0;
    for (std::size_t i = 0; i < val.pairs.size(); ++i) {
        const PairEval e = evaluate_pair(model, val.pairs[i], val.eps[i], val.eps[i], val.tau[i], beta);
        margin += e.dpo.delta;
        loss += e.dpo.loss;
        if (e.dpo.delta > 0) ++wins;
    }
    const auto n = static_cast<double>(val.pairs.size());
    p.mean_margin = margin / n;
    p.loss = loss / n;
    p.accuracy = static_cast<double>(wins) / n;
    return p;
}

DpoReport train_dpo(ToyDenoiser& model, const DPOConfig& config, std::span<const DpoExample> trainset,
                    const ValidationSet& valset, const StepCallback& on_step) {
    config.validate();
    const std::int64_t per_epoch = steps_per_epoch(trainset.size(), config);
    if (per_epoch == 0 && config.epochs > 0) {
        throw SelectionError("train_dpo: " + std::to_string(trainset.size()) +
                             " pairs cannot fill one effective batch of " + std::to_string(config.effective_batch()));
    }
    const Eigen::VectorXd theta_before = model.theta();
    const Eigen::VectorXd ctx_mask = model.layout().group_mask(ParamGroup::ContextMlp);
    const Eigen::VectorXd frozen_mask =
        config.train_context_mlp ? Eigen::VectorXd(Eigen::VectorXd::Ones(ctx_mask.size()) - ctx_mask)
                                 : Eigen::VectorXd(Eigen::VectorXd::Ones(ctx_mask.size()));

    AdamW adapter_opt(model.adapter().factors().size(), config.optim);
    AdamW ctx_opt(model.theta().size(), config.optim);
    Gradients grads = model.make_gradients();
    const GradTargets targets{false, config.train_context_mlp, true};
    const TimestepSpec window = TimestepSpec::window(config.t_lo, config.t_hi);
    SplitMix64 noise_rng(derive_seed(config.seed, "dpo:noise"));

    DpoReport report;
    report.steps_per_epoch = per_epoch;
    report.trajectory.push_back(evaluate_validation(model, valset, config.beta, 0));

    std::vector<std::size_t> order(trainset.size());
    const int eff = config.effective_batch();
    std::int64_t step = 0;
    const std::int64_t total = per_epoch * config.epochs;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return trainset[a].key < trainset[b].key; });
        SplitMix64 shuffle_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        for (std::int64_t s = 0; s < per_epoch; ++s) {
            std::vector<std::size_t> window_idx(order.begin() + s * eff, order.begin() + (s + 1) * eff);
            std::sort(window_idx.begin(), window_idx.end(),
                      [&](std::size_t a, std::size_t b) { return trainset[a].key < trainset[b].key; });
            grads.zero();
            double step_loss = 0.0;
            for (const std::size_t i : window_idx) {
                const DpoExample& ex = trainset[i];
                const TimestepDraw t = sample_timestep(noise_rng, window);
                if (t.t_disc < config.t_lo || t.t_disc > config.t_hi) {
                    throw IntegrityError("timestep " + std::to_string(t.t_disc) + " escaped the DPO window");
                }
                ++report.t_histogram[t.t_disc];
                const Tensor4 eps_w = gaussian_like(ex.x1_w.shape(), noise_rng);
                const Tensor4 eps_l = config.paired_noise ? eps_w : gaussian_like(ex.x1_l.shape(), noise_rng);
                const PairEval e = dpo_pair_loss_and_grad(model, ex, eps_w, eps_l, t.tau, config.beta, targets,
                                                          grads, 1.0 / eff);
                step_loss += e.dpo.loss / eff;
            }
            if (!std::isfinite(step_loss) || !grads.adapter.allFinite() || !grads.base.allFinite()) {
                throw NumericalError("train_dpo: non-finite loss or gradient at step " + std::to_string(step + 1) +
                                     " (loss " + shortest_decimal(step_loss) + ")");
            }
            adapter_opt.step(model.adapter().factors(), grads.adapter);
            if (config.train_context_mlp) ctx_opt.step(model.theta(), grads.base, &ctx_mask);
            ++step;
            report.train_loss.push_back(step_loss);
            if (on_step) on_step(step, model);
            if (step % config.eval_every == 0 || step == total) {
                report.trajectory.push_back(evaluate_validation(model, valset, config.beta, step));
            }
        }
    }
    report.steps = step;

    const Eigen::VectorXd drift = (model.theta() - theta_before).cwiseProduct(frozen_mask);
    if (drift.cwiseAbs().maxCoeff() != 0.0) {
        throw IntegrityError("train_dpo: frozen base weights changed during training");
    }
    return report;
}

}  // namespace physpref
