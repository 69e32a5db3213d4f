// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "physpref/error.hpp"
#include "physpref/io.hpp"

namespace physpref {

struct Telemetry {
    double stay_time_seconds = 0.0;
    std::int64_t play_count = 0;
};

/// One rater's Likert scores for one video inside one (prompt, law) group.
struct RatingRecord {
    std::string rater_id;
    std::string video_id;
    std::string prompt_id;
    std::string group_id;
    std::string generator_id;
    std::optional<int> sa;
    std::optional<int> ptv;
    std::optional<int> persistence;
    std::map<std::string, int> law_scores;
    Telemetry telemetry;

    bool complete_triple() const noexcept { return sa && ptv && persistence; }
    int triple_sum() const;

    /// Every present score keyed by dimension name ("sa", "ptv",
    /// "persistence", then law names).
    std::map<std::string, int> dimension_scores() const;
};

Json to_json(const RatingRecord& record);
RatingRecord rating_from_json(const Json& object, const std::string& source, std::size_t line);

/// Reads a line-delimited ratings file. Malformed lines raise ParseError with
/// the line number; out-of-range scores raise ValidationError.
std::vector<RatingRecord> ingest_ratings(const std::filesystem::path& path);
std::vector<RatingRecord> parse_ratings(std::string_view text, const std::string& source);

struct QCConfig {
    double constancy_threshold = 0.3;
    std::size_t constancy_min_records = 3;
    double copy_paste_threshold = 0.9;
    std::size_t copy_paste_min_videos = 5;
    double peer_mae_threshold = 1.5;
    double clip_duration_seconds = 5.0;
    double telemetry_fraction = 0.5;
    int min_flags_to_remove = 2;
};

struct RaterQCReport {
    std::string rater_id;
    double constancy_std = 0.0;
    double copy_paste_rate = 0.0;
    std::optional<double> peer_mae;  // empty when the rater shares no cell
    std::set<std::string> telemetry_flags;
    std::set<std::string> flags;  // subset of {constancy, copy_paste, peer_mae, telemetry}
    bool removed = false;
};

Json to_json(const RaterQCReport& report);

struct QCResult {
    std::vector<std::string> retained_raters;  // sorted
    std::vector<RaterQCReport> reports;        // sorted by rater_id
};

/// Rater quality control over four independent signals; a rater is removed
/// only when at least `min_flags_to_remove` signals fire. Peer medians are
/// taken over `peer_pool` when given, otherwise over `records`.
QCResult qc_filter_raters(std::span<const RatingRecord> records, const QCConfig& config = {},
                          std::optional<std::span<const RatingRecord>> peer_pool = std::nullopt);

std::vector<RatingRecord> keep_raters(std::span<const RatingRecord> records,
                                      std::span<const std::string> raters);

class UndefinedScoreError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Raters with at least one complete triple for the video, across groups.
std::vector<std::string> complete_triple_raters(const std::string& video_id,
                                                std::span<const RatingRecord> records);

/// Mean over complete-triple raters of SA + PTV + persistence (3..15).
/// A rater with several complete records for the video contributes the mean
/// of their sums. Law scores never enter.
double aggregate_score(const std::string& video_id, std::span<const RatingRecord> records);

/// Per-dimension median across raters for one video.
std::map<std::string, double> median_video_scores(const std::string& video_id,
                                                  std::span<const RatingRecord> records);

double median(std::vector<double> values);
double population_stddev(std::span<const double> values);

}  // namespace physpref
