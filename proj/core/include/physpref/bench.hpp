// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "physpref/io.hpp"

namespace physpref {

inline constexpr std::array<std::string_view, 3> kGeneralDimensions = {"sa", "ptv", "persistence"};

inline constexpr std::array<std::string_view, 7> kEvaluatedLaws = {
    "collision_rebound", "destruction_deformation", "fluids",           "shadow_reflection",
    "chain",             "rolling_sliding",         "throwing_ballistic"};

bool is_general_dimension(std::string_view dim) noexcept;
bool is_evaluated_law(std::string_view law) noexcept;

/// Indices of the frames shown to the judge: every round(src_fps /
/// target_fps)-th frame from 0, then, above `cap`, the candidates at
/// round(k (m - 1) / (cap - 1)) for k < cap.
std::vector<int> frame_sample_indices(int n_frames, double src_fps, double target_fps = 4.0, int cap = 12);

enum class Domain { SolidBody, Fluid, Optical };

std::string_view to_string(Domain d) noexcept;
Domain domain_from_string(std::string_view name);

using LawDomainMap = std::map<std::string, Domain>;

/// fluids -> fluid, shadow_reflection -> optical, every other law
/// (chain included) -> solid_body.
LawDomainMap default_law_domains();
LawDomainMap law_domains_from_json(const Json& j);
Json to_json(const LawDomainMap& m);

struct VideoRef {
    std::string video_id;
    std::string digest;  // sha256 of the video bytes or latent
    int n_frames = 1;
    double fps = 16.0;
};

struct JudgeRequest {
    std::string video_id;
    std::string video_digest;
    std::string dimension;
    std::string prompt;  // augmented prompt
    std::vector<int> frames;
    std::string judge_version;
    std::string cache_key;

    /// Wire form: dimension, frames, prompt, decode directive, output
    /// schema instruction and client-side metadata.
    Json to_json() const;
};

/// Prompt with the expected physical outcome spelled out for each law.
std::string augment_prompt(std::string_view prompt, std::span<const std::string> laws);

/// sha256 of digest, prompt, dimension and judge version, newline-joined.
std::string judge_cache_key(std::string_view video_digest, std::string_view prompt, std::string_view dimension,
                            std::string_view judge_version);

/// One request for one dimension. The dimension must be general or one of
/// `laws`; anything else raises ValidationError before any call is made.
JudgeRequest build_judge_query(const VideoRef& video, std::string_view augmented_prompt, std::string_view dimension,
                               std::span<const std::string> laws, std::string_view judge_version);

/// Rejects any dimension list that is not exactly one entry.
JudgeRequest build_judge_query(const VideoRef& video, std::string_view augmented_prompt,
                               std::span<const std::string> dimensions, std::span<const std::string> laws,
                               std::string_view judge_version);

/// The three general requests followed by one per law.
std::vector<JudgeRequest> build_judge_queries(const VideoRef& video, std::string_view prompt,
                                              std::span<const std::string> laws, std::string_view judge_version);

struct JudgeVerdict {
    std::string video_id;
    std::string dimension;
    int score = 0;
    std::string cache_key;
};

Json to_json(const JudgeVerdict& v);
JudgeVerdict verdict_from_json(const Json& j, const std::string& source, std::size_t line);

/// Accepts exactly one key equal to `expected_dimension` holding a JSON
/// integer in 1..5; anything else raises ProtocolError.
JudgeVerdict parse_verdict(std::string_view raw, std::string_view expected_dimension,
                           std::string_view video_id = {}, std::string_view cache_key = {});

double per_dimension_mean(std::span<const JudgeVerdict> verdicts, std::string_view dimension);

struct LawUnit {
    std::string video_id;
    std::string law;
    int score = 0;
};

/// 0.5 * mean(general) + 0.5 * mean over all (video, law) units.
double overall_score(const std::array<double, 3>& general, std::span<const LawUnit> units);

struct DomainMeans {
    std::optional<double> solid_body;
    std::optional<double> fluid;
    std::optional<double> optical;
};

/// Pooled unit mean per domain; domains without units stay empty.
DomainMeans domain_means(std::span<const LawUnit> units, const LawDomainMap& map);

struct QuadrantSplit {
    using Cell = std::pair<std::string, std::string>;  // (generator, prompt)
    std::vector<Cell> train;        // seen generators x seen prompts
    std::vector<Cell> test_prompt;  // seen generators x unseen prompts
    std::vector<Cell> test_model;   // held-out generator x seen prompts
    std::vector<Cell> test_both;    // held-out generator x unseen prompts
    std::vector<std::string> unseen_prompts;
};

/// Sorted prompts are shuffled with SplitMix64(seed); the last
/// n_heldout_prompts are unseen.
QuadrantSplit split_judge_corpus(std::vector<std::string> generators, std::vector<std::string> prompts,
                                 const std::string& heldout_generator, std::size_t n_heldout_prompts = 12,
                                 std::uint64_t seed = 42);

struct LeaderboardRow {
    std::string model;
    double sa = 0.0;
    double ptv = 0.0;
    double persistence = 0.0;
    std::optional<double> solid_body;
    std::optional<double> fluid;
    std::optional<double> optical;
    double overall = 0.0;
    std::size_t videos = 0;
    std::size_t units = 0;
};

/// Aggregates one model's verdicts. Every law verdict is one unit.
LeaderboardRow summarize_verdicts(const std::string& model, std::span<const JudgeVerdict> verdicts,
                                  const LawDomainMap& map);

/// Fixed-width table: Model, SA, PTV, Persist., Solid-Body, Fluid, Optical,
/// Overall. Absent domains print as "-".
std::string render_leaderboard(std::span<const LeaderboardRow> rows);

Json to_json(const LeaderboardRow& row);

}  // namespace physpref
