// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/curation.hpp"

#include <algorithm>
#include <cmath>

#include "physpref/error.hpp"

namespace physpref {

Json to_json(const ClipScoreRecord& r) {
    Json j = {{"clip_id", r.clip_id}, {"flow_motion_score", r.flow_motion_score}};
    j["adjacent_cosine_mean"] = r.adjacent_cosine_mean ? Json(*r.adjacent_cosine_mean) : Json(nullptr);
    return j;
}

ClipScoreRecord clip_score_from_json(const Json& j, const std::string& source, std::size_t line) {
    check_fields(j, {"clip_id", "adjacent_cosine_mean", "flow_motion_score"},
                 {"clip_id", "flow_motion_score"}, source, line);
    ClipScoreRecord r;
    try {
        r.clip_id = j.at("clip_id").get<std::string>();
        r.flow_motion_score = j.at("flow_motion_score").get<double>();
        if (const auto it = j.find("adjacent_cosine_mean"); it != j.end() && !it->is_null()) {
            r.adjacent_cosine_mean = it->get<double>();
        }
    } catch (const Json::exception& e) {
        throw ParseError(source, line, e.what());
    }
    if (r.flow_motion_score < 0 || !std::isfinite(r.flow_motion_score)) {
        throw ValidationError(source + ":" + std::to_string(line) + ": flow_motion_score must be finite and >= 0");
    }
    if (r.adjacent_cosine_mean && !(*r.adjacent_cosine_mean >= -1.0 && *r.adjacent_cosine_mean <= 1.0)) {
        throw ValidationError(source + ":" + std::to_string(line) + ": adjacent_cosine_mean outside [-1, 1]");
    }
    return r;
}

std::vector<ClipScoreRecord> read_clip_scores(const std::filesystem::path& path) {
    std::vector<ClipScoreRecord> out;
    for (const auto& row : read_jsonl(path)) {
        out.push_back(clip_score_from_json(row.value, path.string(), row.line));
    }
    return out;
}

ClipFeatures clip_features_from_json(const Json& j, const std::string& source, std::size_t line) {
    check_fields(j, {"clip_id", "dim", "frames"}, {"clip_id", "dim", "frames"}, source, line);
    ClipFeatures c;
    try {
        c.clip_id = j.at("clip_id").get<std::string>();
        c.dim = j.at("dim").get<std::size_t>();
        c.frames = j.at("frames").get<std::vector<double>>();
    } catch (const Json::exception& e) {
        throw ParseError(source, line, e.what());
    }
    if (c.dim == 0 || c.frames.size() % c.dim != 0) {
        throw ValidationError(source + ":" + std::to_string(line) + ": frames length " +
                              std::to_string(c.frames.size()) + " is not a multiple of dim " +
                              std::to_string(c.dim));
    }
    return c;
}

std::vector<ClipFeatures> read_clip_features(const std::filesystem::path& path) {
    std::vector<ClipFeatures> out;
    for (const auto& row : read_jsonl(path)) {
        out.push_back(clip_features_from_json(row.value, path.string(), row.line));
    }
    return out;
}

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw ValidationError("cosine similarity undefined for a zero feature vector");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double adjacent_mean(std::size_t n, std::size_t dim, const auto& frame_at) {
    if (n < 2) {
        throw ValidationError("adjacent_similarity needs at least two frames");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::span<const double> a = frame_at(i);
        const std::span<const double> b = frame_at(i + 1);
        if (a.size() != dim || b.size() != dim) {
            throw ValidationError("frame feature vectors differ in dimension");
        }
        sum += cosine(a, b);
    }
    return sum / static_cast<double>(n - 1);
}

}  // namespace

double adjacent_similarity(std::span<const std::vector<double>> frames) {
    const std::size_t dim = frames.empty() ? 0 : frames.front().size();
    return adjacent_mean(frames.size(), dim,
                         [&](std::size_t i) { return std::span<const double>(frames[i]); });
}

double adjacent_similarity(const ClipFeatures& clip) {
    return adjacent_mean(clip.n_frames(), clip.dim, [&](std::size_t i) {
        return std::span<const double>(clip.frames).subspan(i * clip.dim, clip.dim);
    });
}

ScoreKey score_key_from_string(std::string_view name) {
    if (name == "adjacent_cosine_mean" || name == "similarity") return ScoreKey::AdjacentSimilarity;
    if (name == "flow_motion_score" || name == "motion") return ScoreKey::FlowMotion;
    throw ValidationError("unknown score key '" + std::string(name) + "'");
}

std::string_view to_string(ScoreKey key) noexcept {
    return key == ScoreKey::AdjacentSimilarity ? "adjacent_cosine_mean" : "flow_motion_score";
}

std::optional<double> score_of(const ClipScoreRecord& r, ScoreKey key) {
    if (key == ScoreKey::FlowMotion) return r.flow_motion_score;
    return r.adjacent_cosine_mean;
}

BandSplit band_filter(std::span<const ClipScoreRecord> records, ScoreKey key, double lo, double hi) {
    if (lo > hi) {
        throw ValidationError("band_filter: lo > hi");
    }
    BandSplit out;
    for (const auto& r : records) {
        const auto s = score_of(r, key);
        if (!s || *s < lo) {
            out.dropped_low.push_back(r);
        } else if (*s > hi) {
            out.dropped_high.push_back(r);
        } else {
            out.kept.push_back(r);
        }
    }
    const auto by_id = [](const ClipScoreRecord& a, const ClipScoreRecord& b) { return a.clip_id < b.clip_id; };
    std::stable_sort(out.kept.begin(), out.kept.end(), by_id);
    std::stable_sort(out.dropped_low.begin(), out.dropped_low.end(), by_id);
    std::stable_sort(out.dropped_high.begin(), out.dropped_high.end(), by_id);
    return out;
}

double nearest_rank_percentile(std::vector<double> scores, double pct) {
    if (scores.empty()) {
        throw ValidationError("percentile of an empty score list");
    }
    if (!(pct >= 0.0 && pct <= 100.0)) {
        throw ValidationError("percentile must lie in [0, 100]");
    }
    std::sort(scores.begin(), scores.end());
    const double n = static_cast<double>(scores.size());
    // The small slack keeps 5% of 100 at rank 5 despite binary rounding.
    auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, scores.size());
    return scores[rank - 1];
}

std::pair<double, double> percentile_band(std::span<const ClipScoreRecord> records, ScoreKey key,
                                          double lo_pct, double hi_pct) {
    if (!(0.0 <= lo_pct && lo_pct < hi_pct && hi_pct <= 100.0)) {
        throw ValidationError("percentile_band needs 0 <= lo_pct < hi_pct <= 100");
    }
    std::vector<double> scores;
    for (const auto& r : records) {
        if (const auto s = score_of(r, key)) scores.push_back(*s);
    }
    if (scores.empty()) {
        throw ValidationError("percentile_band: no records carry " + std::string(to_string(key)));
    }
    return {nearest_rank_percentile(scores, lo_pct), nearest_rank_percentile(std::move(scores), hi_pct)};
}

}  // namespace physpref
