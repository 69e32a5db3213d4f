// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numeric>

#include "physpref/dpo.hpp"
#include "physpref/error.hpp"
#include "physpref/stats.hpp"
#include "test_support.hpp"

using namespace physpref;
using physpref::testing::central_difference_error;
using physpref::testing::random_examples;
using physpref::testing::tiny_config;

namespace {

std::vector<TrajectoryPoint> traj(std::vector<double> margins, std::int64_t every = 50) {
    std::vector<TrajectoryPoint> out;
    for (std::size_t i = 0; i < margins.size(); ++i) {
        out.push_back({static_cast<std::int64_t>(i + 1) * every, margins[i], 0.0, 0.0});
    }
    return out;
}

double variance(const std::vector<double>& xs) {
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double s = 0.0;
    for (double x : xs) s += (x - mean) * (x - mean);
    return s / static_cast<double>(xs.size() - 1);
}

}  // namespace

TEST_CASE("zero margin costs ln 2") {
    const auto l = dpo_loss(0.4, 0.4, 0.4, 0.4, 100.0);
    CHECK(l.delta == 0.0);
    CHECK(l.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("worked DPO evaluation") {
    const auto l = dpo_loss(0.30, 0.50, 0.35, 0.40, 100.0);
    CHECK(l.delta == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(l.loss == doctest::Approx(std::log1p(std::exp(-15.0))).epsilon(1e-9));
    CHECK(l.loss == doctest::Approx(3.06e-7).epsilon(1e-2));
}

TEST_CASE("derivative in delta at zero is -beta / 2") {
    CHECK(dpo_loss(0.1, 0.1, 0.1, 0.1, 100.0).dloss_ddelta == doctest::Approx(-50.0));
    const double h = 1e-7;
    const auto f = [](double d) { return dpo_loss(0.0, d, 0.0, 0.0, 100.0).loss; };
    CHECK((f(h) - f(-h)) / (2 * h) == doctest::Approx(-50.0).epsilon(1e-6));
}

TEST_CASE("softplus does not overflow") {
    CHECK(softplus(1000.0) == doctest::Approx(1000.0));
    CHECK(softplus(-1000.0) >= 0.0);
    CHECK(std::isfinite(dpo_loss(0.0, 0.0, 50.0, 0.0, 100.0).loss));
}

TEST_CASE("identical winner and loser give identical errors") {
    const auto cfg = tiny_config();
    ToyDenoiser model(cfg, 1);
    auto ex = random_examples(cfg, 1, 2).front();
    ex.x1_l = ex.x1_w;
    SplitMix64 rng(3);
    const auto eps = gaussian_like(ex.x1_w.shape(), rng);
    const auto m = pair_mse(model, ex, eps, eps, 0.05);
    CHECK(m.w == m.l);
    const auto again = pair_mse(model, ex, eps, eps, 0.05);
    CHECK(again.w == m.w);
}

TEST_CASE("DPO gradient matches central differences") {
    const auto cfg = tiny_config();
    ToyDenoiser model(cfg, 31);
    physpref::testing::perturb_adapter(model, 32, 0.05);
    const auto ex = random_examples(cfg, 1, 33).front();
    SplitMix64 rng(34);
    const auto eps = gaussian_like(ex.x1_w.shape(), rng);
    const double tau = 0.05, beta = 100.0;
    auto grads = model.make_gradients();
    grads.zero();
    const auto e = dpo_pair_loss_and_grad(model, ex, eps, eps, tau, beta, {false, true, true}, grads);
    CHECK(std::abs(beta * e.dpo.delta) < 20.0);

    // Adapter factors never reach the reference pass, so the full loss applies.
    const auto full = [&] { return evaluate_pair(model, ex, eps, eps, tau, beta).dpo.loss; };
    CHECK(central_difference_error(model.adapter().factors(), grads.adapter, full) <= 1e-3);

    // The context MLP is shared with the reference, which is a constant of
    // the objective: hold its errors at their current values.
    const auto ref = e.ref;
    const auto policy_only = [&] {
        const auto pi = pair_mse(model, ex, eps, eps, tau);
        return dpo_loss(pi.w, pi.l, ref.w, ref.l, beta).loss;
    };
    const auto ctx = model.layout().group_mask(ParamGroup::ContextMlp);
    const Eigen::VectorXd ctx_grad = grads.base.cwiseProduct(ctx);
    CHECK(central_difference_error(model.theta(), ctx_grad, policy_only) <= 1e-3);
}

TEST_CASE("paired noise has lower margin variance than independent noise") {
    const auto cfg = tiny_config();
    ToyDenoiser model(cfg, 41);
    physpref::testing::perturb_adapter(model, 42, 0.1);
    const auto examples = random_examples(cfg, 5, 43);
    SplitMix64 rng(44);
    std::vector<double> paired, unpaired;
    for (int draw = 0; draw < 100; ++draw) {
        const auto& ex = examples[static_cast<std::size_t>(draw) % examples.size()];
        const double tau = sample_timestep(rng, TimestepSpec::window()).tau;
        const auto e1 = gaussian_like(ex.x1_w.shape(), rng);
        const auto e2 = gaussian_like(ex.x1_w.shape(), rng);
        paired.push_back(evaluate_pair(model, ex, e1, e1, tau, 100.0).dpo.delta);
        unpaired.push_back(evaluate_pair(model, ex, e1, e2, tau, 100.0).dpo.delta);
    }
    CHECK(variance(unpaired) > variance(paired));
}

TEST_CASE("optimizer steps per epoch") {
    DPOConfig c;
    CHECK(c.effective_batch() == 8);
    CHECK(steps_per_epoch(1000, c) == 125);
    CHECK(steps_per_epoch(1007, c) == 125);
    CHECK(steps_per_epoch(7, c) == 0);
    c.micro_batch = 2;
    c.grad_accum = 4;
    CHECK(steps_per_epoch(1000, c) == 125);
}

TEST_CASE("a short DPO run keeps draws in the window and the base frozen") {
    const auto cfg = tiny_config();
    ToyDenoiser model(cfg, 51);
    const auto train = random_examples(cfg, 24, 52);
    const auto val = make_validation_set(random_examples(cfg, 6, 53), 54);
    DPOConfig dc;
    dc.epochs = 2;
    dc.eval_every = 2;
    dc.optim.lr = 1e-3;
    const auto before = model.theta();
    const auto report = train_dpo(model, dc, train, val);
    CHECK(report.steps_per_epoch == 3);
    CHECK(report.steps == 6);
    CHECK(report.train_loss.size() == 6);
    CHECK(report.trajectory.front().step == 0);
    CHECK(report.trajectory.front().mean_margin == 0.0);
    CHECK(report.trajectory.front().loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(report.trajectory.back().step == 6);
    std::int64_t draws = 0;
    for (const auto& [t, n] : report.t_histogram) {
        CHECK(t >= 901);
        CHECK(t <= 999);
        draws += n;
    }
    CHECK(draws == 48);
    CHECK(model.theta() == before);
    CHECK(model.adapter().factors().cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("training is reproducible from the seed") {
    const auto cfg = tiny_config();
    const auto train = random_examples(cfg, 16, 61);
    const auto val = make_validation_set(random_examples(cfg, 4, 62), 63);
    DPOConfig dc;
    dc.epochs = 1;
    ToyDenoiser a(cfg, 64), b(cfg, 64);
    train_dpo(a, dc, train, val);
    train_dpo(b, dc, train, val);
    CHECK(a.adapter().factors() == b.adapter().factors());
}

TEST_CASE("too few pairs for one batch is a selection error") {
    const auto cfg = tiny_config();
    ToyDenoiser model(cfg, 1);
    const auto val = make_validation_set({}, 1);
    CHECK_THROWS_AS(train_dpo(model, DPOConfig{}, random_examples(cfg, 7, 2), val), SelectionError);
}

TEST_CASE("Spearman of monotone, reversed and worked sequences") {
    const std::vector<double> steps = {50, 100, 150, 200, 250};
    const std::vector<double> up = {0.1, 0.2, 0.3, 0.4, 0.5};
    const std::vector<double> down = {0.5, 0.4, 0.3, 0.2, 0.1};
    CHECK(spearman(steps, up) == doctest::Approx(1.0));
    CHECK(spearman(steps, down) == doctest::Approx(-1.0));
    const std::vector<double> margins = {0.02, 0.08, 0.05, 0.15, 0.20};
    CHECK(spearman(steps, margins) == doctest::Approx(0.9));
    const std::vector<double> flat = {1, 1, 1, 1, 1};
    CHECK(spearman(steps, flat) == 0.0);
    CHECK_THROWS_AS(spearman(std::vector<double>{1.0}, std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("average ranks share ties") {
    const std::vector<double> xs = {10, 20, 20, 5};
    CHECK(average_ranks(xs) == std::vector<double>{2.0, 3.5, 3.5, 1.0});
}

TEST_CASE("beta selection requires dominance") {
    // Spearman +0.5 with final 0.200 against +0.1 with final 0.075.
    std::map<double, std::vector<TrajectoryPoint>> c = {{100.0, traj({0.05, 0.02, 0.12, 0.08, 0.2})},
                                                        {30.0, traj({0.07, 0.03, 0.08, 0.02, 0.075})}};
    std::vector<BetaScore> scores;
    CHECK(select_beta(c, &scores) == 100.0);
    CHECK(scores.size() == 2);
    CHECK(select_beta({{30.0, traj({0.1, 0.2})}}) == 30.0);
    std::map<double, std::vector<TrajectoryPoint>> split = {{1.0, traj({0.1, 0.2, 0.3})},
                                                            {2.0, traj({0.9, 0.5, 0.6})}};
    CHECK_THROWS_AS(select_beta(split), SelectionError);
    std::map<double, std::vector<TrajectoryPoint>> grids = {{1.0, traj({0.1, 0.2}, 50)},
                                                            {2.0, traj({0.1, 0.3}, 25)}};
    CHECK_THROWS_AS(select_beta(grids), ValidationError);
}

TEST_CASE("chi-square of window draws is consistent with uniform") {
    SplitMix64 rng(99);
    std::vector<std::int64_t> counts(99, 0);
    for (int i = 0; i < 100000; ++i) ++counts[static_cast<std::size_t>(sample_timestep(rng, TimestepSpec::window()).t_disc - 901)];
    const double stat = chi_square_uniform(counts);
    const boost::math::chi_squared dist(98.0);
    CHECK(boost::math::cdf(boost::math::complement(dist, stat)) > 0.01);
    const std::vector<std::int64_t> skewed = {100, 0, 0, 0};
    CHECK(chi_square_uniform(skewed) == doctest::Approx(300.0));
}
