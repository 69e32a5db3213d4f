// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "physpref/io.hpp"
#include "physpref/tensor.hpp"

namespace physpref {

/// What the oracle sees in one frame.
struct FrameObservation {
    bool visible = false;
    double mass = 0.0;  // summed ball coverage, in pixels
    std::array<double, 2> centroid = {0.0, 0.0};
    std::array<double, 3> color = {0.0, 0.0, 0.0};
};

/// Per-frame observations of a single-ball video: the background is the
/// per-channel median, coverage is the distance to it relative to the
/// frame's farthest pixel, and the ball color is the mean of the pixels
/// within 2% of that maximum.
std::vector<FrameObservation> observe(const Tensor4& frames);

/// Physical-violation residuals; 0 means no evidence of a violation.
struct OracleResiduals {
    double presence = 0.0;  // fraction of frames without a visible ball
    double mass = 0.0;      // worst relative change of mass against the opening frames
    double color = 0.0;     // worst RGB distance from the opening color
    double spike = 0.0;     // largest horizontal speed gain over the running maximum (px/frame)
    double drift = 0.0;     // upward acceleration in free flight (px/frame^2), or 1 when stuck to the ceiling
    double teleport = 0.0;  // largest opposite-sign acceleration pulse pair on one axis (px/frame^2)

    Json to_json() const;
};

/// Opening frames that define the reference mass and color.
inline constexpr int kOracleReferenceFrames = 17;

OracleResiduals oracle_residuals(const Tensor4& frames);

/// 1..5 per general dimension and evaluated law, from banded residuals.
std::map<std::string, int> oracle_scores(const OracleResiduals& r);
std::map<std::string, int> oracle_scores(const Tensor4& frames);

/// Residuals measured directly on a toy latent (channels 0-2 carry the
/// 8x8-pooled RGB; latent frame 0 is pixel frame 0, latent frame k >= 1
/// averages pixel frames 4k-3..4k). Motion is tracked by the
/// deviation-weighted block centroid.
struct LatentOracleResiduals {
    double presence = 0.0;  // fraction of latent frames without the ball
    double mass = 0.0;      // worst relative change of summed deviation
    double color = 0.0;     // worst distance between unit deviation directions
    double spike = 0.0;     // largest relative horizontal speed gain over the running maximum
    double energy = 0.0;    // largest relative gain of kinetic plus potential energy
    double teleport = 0.0;  // largest single-step velocity outlier on one axis (px/frame)

    Json to_json() const;
};

/// Latent frames covering the opening pixel frames.
inline constexpr int kLatentReferenceFrames = 5;

LatentOracleResiduals latent_oracle_residuals(const Tensor4& latent);

std::map<std::string, int> latent_oracle_scores(const LatentOracleResiduals& r);
std::map<std::string, int> latent_oracle_scores(const Tensor4& latent);

/// Sum of all ten dimension scores.
int oracle_total(const std::map<std::string, int>& scores);

}  // namespace physpref
