// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>
#include <vector>

#include "physpref/dpo.hpp"

namespace physpref {

/// 1-based ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks. Throws ValidationError for fewer
/// than two points or unequal lengths. A constant input has no defined
/// correlation and yields 0.
double spearman(std::span<const double> xs, std::span<const double> ys);

/// Spearman(step, mean_margin) over a trajectory.
double trajectory_spearman(std::span<const TrajectoryPoint> trajectory);

struct BetaScore {
    double beta = 0.0;
    double spearman = 0.0;
    double final_margin = 0.0;
};

/// Picks the beta whose trajectory is strictly best on both Spearman
/// monotonicity and final-step mean margin. Throws SelectionError ("no
/// dominant candidate") otherwise, and ValidationError when the step grids
/// differ.
double select_beta(const std::map<double, std::vector<TrajectoryPoint>>& candidates,
                   std::vector<BetaScore>* scores = nullptr);

/// Pearson chi-square statistic of observed counts against a uniform
/// expectation over `counts.size()` cells.
double chi_square_uniform(std::span<const std::int64_t> counts);

}  // namespace physpref
