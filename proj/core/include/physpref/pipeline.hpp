// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "physpref/events.hpp"
#include "physpref/manifest.hpp"
#include "physpref/ratings.hpp"

namespace physpref {

struct VideoEntry {
    std::string video_id;
    std::string prompt_id;
    std::string group_id;
    std::string generator_id;
    double s_score = 0.0;
    int rater_count = 0;
    std::optional<std::string> first_frame_path;
    std::optional<std::string> first_frame_sha256;
};

Json to_json(const VideoEntry& v);
VideoEntry video_from_json(const Json& j);

struct PreferencePair {
    std::string winner;
    std::string loser;
    std::string prompt_id;
    std::string group_id;
    double margin = 0.0;
    EventClass event_class = EventClass::Unclassified;
    std::optional<std::string> winner_frame_sha256;
    std::optional<std::string> loser_frame_sha256;

    /// "prompt|group|winner|loser", the identifier used in manifests.
    std::string key() const;
};

Json to_json(const PreferencePair& p);
PreferencePair pair_from_json(const Json& j);
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);
std::string pairs_to_jsonl(std::span<const PreferencePair> pairs);

/// Prompt id carried by a pair key.
std::string prompt_of_key(const std::string& key);
std::string group_of_key(const std::string& key);

/// Sort order used everywhere pairs are emitted: (group_id, winner, loser).
bool pair_order(const PreferencePair& a, const PreferencePair& b);

// ---- T0 -------------------------------------------------------------------

struct T0Result {
    std::vector<VideoEntry> videos;  // one per (video, group), sorted by (group, video)
    std::vector<std::string> excluded_videos;  // no complete-triple rater
    QCResult qc;
    StageManifest manifest;
};

/// Per-(video, group) entries with s(v) over the cross-group union of
/// complete-triple raters. Videos without any are listed as excluded.
std::vector<VideoEntry> build_video_entries(std::span<const RatingRecord> records,
                                            std::vector<std::string>* excluded = nullptr);

T0Result run_t0(std::span<const RatingRecord> records, const QCConfig& qc = {});

// ---- T1 -------------------------------------------------------------------

struct T1Stats {
    std::int64_t ties = 0;
    std::int64_t low_margin = 0;
    std::int64_t rater_filtered = 0;
    std::int64_t retained = 0;
};

/// All within-group ordered pairs with s(w) - s(l) >= margin_min and both
/// rater counts >= r_min, sorted by (group, winner, loser). A group whose
/// videos span more than one prompt aborts with IntegrityError.
std::vector<PreferencePair> t1_enumerate_pairs(std::span<const VideoEntry> videos,
                                               double margin_min = 1.0, int r_min = 2,
                                               T1Stats* stats = nullptr);

struct SplitFractions {
    double train = 0.7;
    double val = 0.15;
    double heldout = 0.15;
};

struct PromptSplit {
    std::vector<PreferencePair> train;
    std::vector<PreferencePair> val;
    std::vector<PreferencePair> heldout;
    std::vector<std::string> train_prompts;  // sorted
    std::vector<std::string> val_prompts;
    std::vector<std::string> heldout_prompts;
};

/// Prompt-count allocation: floors per fraction, remainder to train; a split
/// with a nonzero fraction that floors to zero takes one prompt from train.
std::array<std::size_t, 3> split_counts(std::size_t n_prompts, const SplitFractions& f);

PromptSplit t1_split_prompts(std::span<const PreferencePair> pairs, const SplitFractions& fractions,
                             std::uint64_t seed);

StageManifest make_t1_manifest(std::span<const PreferencePair> pairs, const PromptSplit& split,
                               const T1Stats& stats, const Json& params);

/// Assigns event_class to each pair from its prompt text.
void label_event_classes(std::span<PreferencePair> pairs,
                         const std::map<std::string, std::string>& prompt_texts,
                         const EventRuleTable& rules = EventRuleTable::builtin());

// ---- T2 -------------------------------------------------------------------

inline constexpr std::array<std::string_view, 4> kImageExtensions = {".png", ".jpg", ".jpeg", ".ppm"};

/// Path of a video's first-frame image under `root`, or nullopt if absent.
/// Throws IntegrityError if several candidate files exist and IoError if the
/// candidate is not a readable regular file.
std::optional<std::filesystem::path> resolve_first_frame(const std::filesystem::path& root,
                                                         const std::string& video_id);

struct DroppedPair {
    std::string key;
    std::vector<std::string> missing_videos;
};

struct T2Result {
    std::vector<PreferencePair> survivors;
    std::vector<DroppedPair> dropped;
    std::map<std::string, std::string> digests;  // video -> sha256 of resolved bytes
    StageManifest manifest;
};

T2Result t2_resolve_conditioning(std::span<const PreferencePair> pairs,
                                 const std::filesystem::path& image_root, const Json& params = Json::object());

// ---- T3 -------------------------------------------------------------------

using QuotaMap = std::map<EventClass, std::size_t>;

/// Round-4 class budget: A 513, B 93, C 168, D 68, E 13, F 75, G 55, unclassified 15.
QuotaMap reference_quotas();

/// Largest-remainder rescaling of `weights` to `total` (ties in class order).
QuotaMap scale_quotas(const QuotaMap& weights, std::size_t total);

Json quotas_to_json(const QuotaMap& quotas);
QuotaMap quotas_from_json(const Json& j);

struct T3Result {
    std::vector<PreferencePair> subset;  // sorted by pair_order
    StageManifest manifest;
};

/// Per class: sort, shuffle with SplitMix64(derive_seed(seed, "class:<name>")),
/// take the first quota. Throws SelectionError naming the class when the pool
/// is short.
T3Result t3_quota_sample(std::span<const PreferencePair> pairs, const QuotaMap& quotas,
                         std::uint64_t seed, const Json& params = Json::object());

// ---- funnel ---------------------------------------------------------------

struct FunnelRow {
    std::string stage;
    std::int64_t pairs = 0;
    std::optional<std::int64_t> groups;
    std::optional<std::int64_t> prompts;
};

struct FunnelReport {
    std::vector<FunnelRow> rows;
    std::string table() const;
};

/// Checks manifest digests, T1 >= T2 candidates >= T3 pool >= trainset, and
/// that no heldout prompt appears in T2 or T3 items. Throws IntegrityError on
/// the first violation.
FunnelReport verify_funnel(const StageManifest& t1, const StageManifest& t2, const StageManifest& t3);

}  // namespace physpref
