// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "physpref/io.hpp"

namespace physpref {

struct ClipScoreRecord {
    std::string clip_id;
    std::optional<double> adjacent_cosine_mean;  // absent for single-frame clips
    double flow_motion_score = 0.0;
};

Json to_json(const ClipScoreRecord& r);
ClipScoreRecord clip_score_from_json(const Json& j, const std::string& source, std::size_t line);
std::vector<ClipScoreRecord> read_clip_scores(const std::filesystem::path& path);

/// Per-clip frame features: `frames` holds n_frames * dim values, frame-major.
struct ClipFeatures {
    std::string clip_id;
    std::size_t dim = 0;
    std::vector<double> frames;

    std::size_t n_frames() const { return dim == 0 ? 0 : frames.size() / dim; }
};

ClipFeatures clip_features_from_json(const Json& j, const std::string& source, std::size_t line);
std::vector<ClipFeatures> read_clip_features(const std::filesystem::path& path);

/// Mean cosine similarity of consecutive frame vectors. Throws
/// ValidationError on fewer than two frames, a zero vector, or ragged input.
double adjacent_similarity(std::span<const std::vector<double>> frames);
double adjacent_similarity(const ClipFeatures& clip);

enum class ScoreKey { AdjacentSimilarity, FlowMotion };

ScoreKey score_key_from_string(std::string_view name);
std::string_view to_string(ScoreKey key) noexcept;

/// Value of `key` for a record; nullopt when the record has no such score.
std::optional<double> score_of(const ClipScoreRecord& r, ScoreKey key);

struct BandSplit {
    std::vector<ClipScoreRecord> kept;
    std::vector<ClipScoreRecord> dropped_low;
    std::vector<ClipScoreRecord> dropped_high;
};

/// Keeps lo <= score <= hi. Records lacking the score count as dropped_low.
/// Output lists are sorted by clip_id.
BandSplit band_filter(std::span<const ClipScoreRecord> records, ScoreKey key, double lo, double hi);

/// Nearest-rank percentile: the value at rank max(1, ceil(p/100 * n)) of the
/// sorted scores.
double nearest_rank_percentile(std::vector<double> scores, double pct);

std::pair<double, double> percentile_band(std::span<const ClipScoreRecord> records, ScoreKey key,
                                          double lo_pct, double hi_pct);

}  // namespace physpref
