// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "physpref/denoiser.hpp"
#include "physpref/flow.hpp"
#include "physpref/optim.hpp"

namespace physpref {

struct DpoLoss {
    double loss = 0.0;
    double delta = 0.0;
    double dloss_ddelta = 0.0;  // -beta * sigmoid(-beta * delta)
};

/// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;

/// delta = (mse_pi_l - mse_pi_w) - (mse_ref_l - mse_ref_w),
/// loss = softplus(-beta * delta).
DpoLoss dpo_loss(double mse_pi_w, double mse_pi_l, double mse_ref_w, double mse_ref_l, double beta);

/// A preference pair in latent space. Winner and loser share conditioning.
struct DpoExample {
    std::string key;
    Tensor4 x1_w;
    Tensor4 x1_l;
    ConditioningPack cond;
};

struct PairMse {
    double w = 0.0;
    double l = 0.0;
};

/// Flow-matching MSE of winner and loser at the same tau. Pass the same
/// tensor as eps_w and eps_l for paired noise.
PairMse pair_mse(const ToyDenoiser& model, const DpoExample& ex, const Tensor4& eps_w, const Tensor4& eps_l,
                 double tau);

struct PairEval {
    PairMse pi;
    PairMse ref;
    DpoLoss dpo;
};

/// Policy and reference (adapter zeroed in place) evaluation of one pair.
PairEval evaluate_pair(ToyDenoiser& model, const DpoExample& ex, const Tensor4& eps_w, const Tensor4& eps_l,
                       double tau, double beta);

/// evaluate_pair plus weight * dloss/dparams accumulated into `grads`.
PairEval dpo_pair_loss_and_grad(ToyDenoiser& model, const DpoExample& ex, const Tensor4& eps_w,
                                const Tensor4& eps_l, double tau, double beta, const GradTargets& targets,
                                Gradients& grads, double weight = 1.0);

struct DPOConfig {
    double beta = 100.0;
    int t_lo = 901;
    int t_hi = 999;
    AdamWConfig optim{1e-5, 0.9, 0.999, 1e-8, 0.0};
    int micro_batch = 1;
    int grad_accum = 8;
    int epochs = 2;
    std::uint64_t seed = 0;
    int eval_every = 25;
    bool paired_noise = true;
    bool train_context_mlp = false;

    int effective_batch() const { return micro_batch * grad_accum; }
    void validate() const;

    Json to_json() const;
    static DPOConfig from_json(const Json& j);
};

/// floor(n_pairs / effective batch); a trailing partial window is dropped.
std::int64_t steps_per_epoch(std::size_t n_pairs, const DPOConfig& config);

struct TrajectoryPoint {
    std::int64_t step = 0;
    double mean_margin = 0.0;  // mean delta over the validation pairs
    double loss = 0.0;         // mean DPO loss over the validation pairs
    double accuracy = 0.0;     // fraction of pairs with delta > 0
};

Json to_json(const TrajectoryPoint& p);
TrajectoryPoint trajectory_point_from_json(const Json& j);

/// Pairs with pre-drawn (eps, tau) so repeated evaluation is deterministic.
struct ValidationSet {
    std::vector<DpoExample> pairs;
    std::vector<Tensor4> eps;
    std::vector<double> tau;
};

/// One standard-normal eps and one window tau per pair from
/// SplitMix64(derive_seed(seed, "validation")).
ValidationSet make_validation_set(std::vector<DpoExample> pairs, std::uint64_t seed, int t_lo = 901,
                                  int t_hi = 999);

TrajectoryPoint evaluate_validation(ToyDenoiser& model, const ValidationSet& val, double beta,
                                    std::int64_t step = 0);

struct DpoReport {
    std::vector<TrajectoryPoint> trajectory;  // step 0 first, then every eval_every steps and the last
    std::int64_t steps = 0;
    std::int64_t steps_per_epoch = 0;
    std::map<int, std::int64_t> t_histogram;  // t_disc -> draws
    std::vector<double> train_loss;           // per optimizer step
};

using StepCallback = std::function<void(std::int64_t step, const ToyDenoiser& model)>;

/// Paired-noise DPO over the adapter (and the context MLP when configured).
/// Each epoch shuffles the pairs with SplitMix64(derive_seed(seed, epoch));
/// every window of effective_batch pairs is accumulated in sorted key order.
/// Throws IntegrityError if a draw leaves [t_lo, t_hi] or a frozen base
/// weight changes, NumericalError on a non-finite loss.
DpoReport train_dpo(ToyDenoiser& model, const DPOConfig& config, std::span<const DpoExample> trainset,
                    const ValidationSet& valset, const StepCallback& on_step = {});

}  // namespace physpref
