// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "physpref/events.hpp"
#include "physpref/pipeline.hpp"
#include "physpref/ratings.hpp"
#include "physpref/tensor.hpp"

namespace physpref {

/// Ball state and scene constants, in pixels and frames. +y points down.
struct ToyParams {
    double x0 = 32.0;
    double y0 = 32.0;
    double vx = 0.0;
    double vy = 0.0;
    double gravity = 0.0;
    double restitution = 1.0;  // (0, 1]
    double radius = 5.0;
    std::array<double, 3> hsv = {0.0, 0.8, 0.9};

    Json to_json() const;
    static ToyParams from_json(const Json& j);
};

enum class Corruption { WallPass, GravityFlip, SpeedJump, ColorDrift, Teleport };

inline constexpr std::array<Corruption, 5> kAllCorruptions = {
    Corruption::WallPass, Corruption::GravityFlip, Corruption::SpeedJump, Corruption::ColorDrift,
    Corruption::Teleport};

std::string_view to_string(Corruption c) noexcept;
Corruption corruption_from_string(std::string_view name);

/// Frames at which the ball meets a wall, with the normal speed at impact.
struct BounceEvent {
    double time = 0.0;
    double normal_speed = 0.0;
    int wall = 0;  // 0 left, 1 right, 2 top, 3 bottom
};

struct ToyClip {
    Tensor4 frames;  // (3, T, H, W) pixels in [0, 1]
    ToyParams params;
    double background = 0.0;
    std::vector<std::array<double, 2>> centers;  // analytic ball centre per frame
    std::vector<BounceEvent> bounces;
    std::optional<Corruption> corruption;
    int onset = -1;  // first frame touched by the corruption
    std::uint64_t seed = 0;
};

/// Frame count that makes up the shared conditioning prefix of a pair.
inline constexpr int kConditioningFrames = 17;

/// Exact event-driven trajectory: parabolic flight between wall contacts,
/// each contact reflecting the normal velocity scaled by the restitution.
/// A floor bounce slower than a small threshold leaves the ball resting.
/// Rendered as an anti-aliased disk, coverage clamp(r + 0.5 - d, 0, 1),
/// over a uniform gray background whose level is set by `seed`.
ToyClip gen_clip(const ToyParams& params, int T, int H, int W, std::uint64_t seed);

/// Parameters drawn from `seed` such that the clean clip stays clear of the
/// ceiling, keeps |vx| >= 1, and hits a wall with normal speed >= 1 between
/// the conditioning prefix and frame 40. Every corruption therefore has an
/// observable effect.
ToyParams sample_params(std::uint64_t seed, int T = 49, int H = 64, int W = 64);

/// One localized violation starting at or after frame 17; the first 17
/// frames are left bit-identical.
ToyClip corrupt(const ToyClip& clip, Corruption mode, std::uint64_t seed);

/// Prompt template for an event class, e.g. "A red ball bounces off the
/// floor and walls". The keyword classifier maps it back to its class.
std::string toy_prompt(EventClass c, std::string_view color);

/// Color words used in toy prompts, each with the hue it renders as.
inline constexpr std::array<std::string_view, 8> kToyColors = {"red",  "orange", "yellow", "green",
                                                              "teal", "blue",   "purple", "pink"};
double toy_hue(std::string_view color);

/// The law scored for prompts of an event class.
std::string_view toy_law(EventClass c) noexcept;

struct ToyPairRecord {
    std::string prompt_id;
    std::string group_id;
    std::string prompt;
    std::string color;
    std::string law;
    EventClass event_class = EventClass::Unclassified;
    std::string winner;
    std::string loser;
    Corruption corruption = Corruption::WallPass;
    std::uint64_t clip_seed = 0;
    std::uint64_t corruption_seed = 0;

    Json to_json() const;
};

struct ToyDataset {
    std::vector<ToyPairRecord> pairs;
    std::vector<RatingRecord> ratings;
};

/// One prompt and group per pair: a clean winner and a corrupted loser.
/// Classes follow the largest-remainder allotment of `class_mix`. Every
/// rater scores both videos with winner axes in {4, 5} and loser axes in
/// {1, 2, 3}, so s(w) - s(l) >= 3; each video gets 2 to 4 raters. When
/// `spam_raters` > 0, that many low-effort raters are mixed in for QC to
/// catch.
ToyDataset make_pref_dataset(std::size_t n_pairs, const QuotaMap& class_mix, std::uint64_t seed,
                             int spam_raters = 0);

/// Regenerates the clips of one dataset pair.
std::pair<ToyClip, ToyClip> render_pair(const ToyPairRecord& pair, int T = 49, int H = 64, int W = 64);

/// Binary PPM (P6) of one frame.
std::string frame_to_ppm(const Tensor4& frames, int frame);

}  // namespace physpref
