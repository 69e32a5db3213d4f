// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "physpref/error.hpp"

namespace physpref {

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw ValidationError("spearman: length mismatch");
    }
    if (xs.size() < 2) {
        throw ValidationError("spearman needs at least two points");
    }
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    const double n = static_cast<double>(rx.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double trajectory_spearman(std::span<const TrajectoryPoint> trajectory) {
    std::vector<double> steps, margins;
    for (const auto& p : trajectory) {
        steps.push_back(static_cast<double>(p.step));
        margins.push_back(p.mean_margin);
    }
    return spearman(steps, margins);
}

double select_beta(const std::map<double, std::vector<TrajectoryPoint>>& candidates, std::vector<BetaScore>* scores) {
    if (candidates.empty()) {
        throw SelectionError("select_beta: no candidates");
    }
    const auto& grid_ref = candidates.begin()->second;
    std::vector<BetaScore> local;
    for (const auto& [beta, traj] : candidates) {
        if (traj.size() != grid_ref.size() ||
            !std::equal(traj.begin(), traj.end(), grid_ref.begin(),
                        [](const TrajectoryPoint& a, const TrajectoryPoint& b) { return a.step == b.step; })) {
            throw ValidationError("select_beta: trajectories do not share a step grid");
        }
        if (traj.empty()) {
            throw ValidationError("select_beta: empty trajectory");
        }
        local.push_back({beta, traj.size() >= 2 ? trajectory_spearman(traj) : 0.0, traj.back().mean_margin});
    }
    if (scores) *scores = local;
    if (local.size() == 1) return local.front().beta;
    for (const auto& c : local) {
        const bool dominant = std::all_of(local.begin(), local.end(), [&](const BetaScore& o) {
            return o.beta == c.beta || (c.spearman > o.spearman && c.final_margin > o.final_margin);
        });
        if (dominant) return c.beta;
    }
    throw SelectionError("select_beta: no dominant candidate (no beta leads on both Spearman and final margin)");
}

double chi_square_uniform(std::span<const std::int64_t> counts) {
    if (counts.empty()) {
        throw ValidationError("chi_square_uniform: no cells");
    }
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::int64_t{0}));
    const double expected = total / static_cast<double>(counts.size());
    if (expected <= 0.0) {
        throw ValidationError("chi_square_uniform: no observations");
    }
    double chi2 = 0.0;
    for (const auto c : counts) {
        const double d = static_cast<double>(c) - expected;
        chi2 += d * d / expected;
    }
    return chi2;
}

}  // namespace physpref
