// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "physpref/error.hpp"
#include "physpref/hashing.hpp"
#include "physpref/rng.hpp"

namespace physpref {

bool is_general_dimension(std::string_view dim) noexcept {
    return std::find(kGeneralDimensions.begin(), kGeneralDimensions.end(), dim) != kGeneralDimensions.end();
}

bool is_evaluated_law(std::string_view law) noexcept {
    return std::find(kEvaluatedLaws.begin(), kEvaluatedLaws.end(), law) != kEvaluatedLaws.end();
}

std::vector<int> frame_sample_indices(int n_frames, double src_fps, double target_fps, int cap) {
    if (n_frames < 1) throw ValidationError("frame_sample_indices: n_frames must be >= 1");
    if (!(src_fps > 0) || !(target_fps > 0)) throw ValidationError("frame_sample_indices: fps must be positive");
    if (cap < 1) throw ValidationError("frame_sample_indices: cap must be >= 1");
    const int stride = std::max(1, static_cast<int>(std::lround(src_fps / target_fps)));
    std::vector<int> candidates;
    for (int i = 0; i < n_frames; i += stride) candidates.push_back(i);
    const auto m = static_cast<int>(candidates.size());
    if (m <= cap) return candidates;
    if (cap == 1) return {candidates.front()};
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(cap));
    for (int k = 0; k < cap; ++k) {
        const auto j = std::lround(static_cast<double>(k) * (m - 1) / (cap - 1));
        out.push_back(candidates[static_cast<std::size_t>(j)]);
    }
    return out;
}

std::string_view to_string(Domain d) noexcept {
    switch (d) {
        case Domain::SolidBody: return "solid_body";
        case Domain::Fluid: return "fluid";
        case Domain::Optical: return "optical";
    }
    return "solid_body";
}

Domain domain_from_string(std::string_view name) {
    if (name == "solid_body") return Domain::SolidBody;
    if (name == "fluid") return Domain::Fluid;
    if (name == "optical") return Domain::Optical;
    throw ValidationError("unknown domain '" + std::string(name) + "'");
}

LawDomainMap default_law_domains() {
    LawDomainMap m;
    for (const auto law : kEvaluatedLaws) m[std::string(law)] = Domain::SolidBody;
    m["fluids"] = Domain::Fluid;
    m["shadow_reflection"] = Domain::Optical;
    return m;
}

LawDomainMap law_domains_from_json(const Json& j) {
    LawDomainMap m = default_law_domains();
    for (const auto& [law, dom] : j.items()) m[law] = domain_from_string(dom.get<std::string>());
    return m;
}

Json to_json(const LawDomainMap& m) {
    Json j = Json::object();
    for (const auto& [law, d] : m) j[law] = std::string(to_string(d));
    return j;
}

namespace {

std::string_view law_outcome(std::string_view law) {
    if (law == "collision_rebound") return "colliding objects rebound and never pass through each other or a wall";
    if (law == "destruction_deformation") return "anything that breaks or deforms stays broken and does not reassemble";
    if (law == "fluids") return "liquid flows downward, keeps its volume and does not vanish";
    if (law == "shadow_reflection") return "shadows and reflections move with their objects";
    if (law == "chain") return "each event triggers the next in causal order";
    if (law == "rolling_sliding") return "the object rolls or slides with smoothly changing speed";
    if (law == "throwing_ballistic") return "the object follows a smooth arc under constant gravity";
    return "motion obeys everyday physics";
}

std::string_view schema_instruction() {
    return "Answer with a single JSON object holding exactly one key, the dimension name, and one integer "
           "score from 1 to 5. No other text.";
}

}  // namespace

std::string augment_prompt(std::string_view prompt, std::span<const std::string> laws) {
    std::string out(prompt);
    if (laws.empty()) return out;
    out += " Expected physical outcome:";
    for (const auto& law : laws) {
        out += ' ';
        out += law_outcome(law);
        out += '.';
    }
    return out;
}

std::string judge_cache_key(std::string_view video_digest, std::string_view prompt, std::string_view dimension,
                            std::string_view judge_version) {
    std::string material;
    material.reserve(video_digest.size() + prompt.size() + dimension.size() + judge_version.size() + 3);
    material.append(video_digest).append("\n").append(prompt).append("\n").append(dimension).append("\n").append(
        judge_version);
    return sha256_hex(material);
}

Json JudgeRequest::to_json() const {
    return {{"video_id", video_id},
            {"video_digest", video_digest},
            {"dimension", dimension},
            {"prompt", prompt},
            {"frames", frames},
            {"decode", {{"strategy", "greedy"}, {"temperature", 0}}},
            {"output_schema", {{"type", "object"}, {"required", {dimension}}, {"max_keys", 1}}},
            {"instruction", schema_instruction()},
            {"metadata", {{"target_fps", 4}, {"max_frames", 12}, {"short_side", 360}, {"image_max_tokens", 1024}}},
            {"judge_version", judge_version},
            {"cache_key", cache_key}};
}

JudgeRequest build_judge_query(const VideoRef& video, std::string_view augmented_prompt, std::string_view dimension,
                               std::span<const std::string> laws, std::string_view judge_version) {
    const bool law_ok = std::find(laws.begin(), laws.end(), dimension) != laws.end();
    if (!is_general_dimension(dimension) && !law_ok) {
        throw ValidationError("dimension '" + std::string(dimension) + "' does not apply to video " + video.video_id);
    }
    JudgeRequest r;
    r.video_id = video.video_id;
    r.video_digest = video.digest;
    r.dimension = std::string(dimension);
    r.prompt = std::string(augmented_prompt);
    r.frames = frame_sample_indices(video.n_frames, video.fps);
    r.judge_version = std::string(judge_version);
    r.cache_key = judge_cache_key(r.video_digest, r.prompt, r.dimension, r.judge_version);
    return r;
}

JudgeRequest build_judge_query(const VideoRef& video, std::string_view augmented_prompt,
                               std::span<const std::string> dimensions, std::span<const std::string> laws,
                               std::string_view judge_version) {
    if (dimensions.size() != 1) {
        throw ProtocolError("a judge request carries exactly one dimension, got " + std::to_string(dimensions.size()));
    }
    return build_judge_query(video, augmented_prompt, dimensions.front(), laws, judge_version);
}

std::vector<JudgeRequest> build_judge_queries(const VideoRef& video, std::string_view prompt,
                                              std::span<const std::string> laws, std::string_view judge_version) {
    const std::string aug = augment_prompt(prompt, laws);
    std::vector<JudgeRequest> out;
    for (const auto dim : kGeneralDimensions) {
        out.push_back(build_judge_query(video, aug, dim, laws, judge_version));
    }
    for (const auto& law : laws) {
        if (is_general_dimension(law)) {
            throw ValidationError("law list may not repeat a general dimension");
        }
        out.push_back(build_judge_query(video, aug, law, laws, judge_version));
    }
    return out;
}

Json to_json(const JudgeVerdict& v) {
    return {{"video_id", v.video_id}, {"dimension", v.dimension}, {"score", v.score}, {"cache_key", v.cache_key}};
}

JudgeVerdict verdict_from_json(const Json& j, const std::string& source, std::size_t line) {
    check_fields(j, {"video_id", "dimension", "score", "cache_key"}, {"video_id", "dimension", "score", "cache_key"},
                 source, line);
    const auto& s = j.at("score");
    if (!s.is_number_integer() || s.get<std::int64_t>() < 1 || s.get<std::int64_t>() > 5) {
        throw ValidationError(source + ":" + std::to_string(line) + ": verdict score must be an integer in 1..5");
    }
    return {j.at("video_id").get<std::string>(), j.at("dimension").get<std::string>(), s.get<int>(),
            j.at("cache_key").get<std::string>()};
}

JudgeVerdict parse_verdict(std::string_view raw, std::string_view expected_dimension, std::string_view video_id,
                           std::string_view cache_key) {
    Json j;
    // Counted while parsing: the object model would fold a repeated key into one.
    std::size_t top_keys = 0;
    try {
        j = Json::parse(raw, [&top_keys](int depth, Json::parse_event_t event, Json&) {
            if (depth == 1 && event == Json::parse_event_t::key) ++top_keys;
            return true;
        });
    } catch (const Json::parse_error&) {
        throw ProtocolError("judge response is not JSON");
    }
    if (!j.is_object()) throw ProtocolError("judge response is not a JSON object");
    if (top_keys != 1) {
        throw ProtocolError("judge response must hold exactly one key, got " + std::to_string(top_keys));
    }
    const auto it = j.begin();
    if (it.key() != expected_dimension) {
        throw ProtocolError("judge answered dimension '" + it.key() + "', expected '" + std::string(expected_dimension) +
                            "'");
    }
    if (!it.value().is_number_integer()) {
        throw ProtocolError("judge score for '" + it.key() + "' is not a JSON integer");
    }
    const auto score = it.value().get<std::int64_t>();
    if (score < 1 || score > 5) {
        throw ProtocolError("judge score " + std::to_string(score) + " outside 1..5");
    }
    return {std::string(video_id), it.key(), static_cast<int>(score), std::string(cache_key)};
}

double per_dimension_mean(std::span<const JudgeVerdict> verdicts, std::string_view dimension) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : verdicts) {
        if (v.dimension == dimension) {
            sum += v.score;
            ++n;
        }
    }
    if (n == 0) throw ValidationError("no verdicts for dimension '" + std::string(dimension) + "'");
    return sum / static_cast<double>(n);
}

double overall_score(const std::array<double, 3>& general, std::span<const LawUnit> units) {
    if (units.empty()) throw ValidationError("overall_score needs at least one (video, law) unit");
    double unit_sum = 0.0;
    for (const auto& u : units) unit_sum += u.score;
    const double general_mean = (general[0] + general[1] + general[2]) / 3.0;
    return 0.5 * general_mean + 0.5 * (unit_sum / static_cast<double>(units.size()));
}

DomainMeans domain_means(std::span<const LawUnit> units, const LawDomainMap& map) {
    std::array<double, 3> sum{};
    std::array<std::size_t, 3> n{};
    for (const auto& u : units) {
        const auto it = map.find(u.law);
        if (it == map.end()) throw ValidationError("law '" + u.law + "' has no domain");
        const auto k = static_cast<std::size_t>(it->second);
        sum[k] += u.score;
        ++n[k];
    }
    const auto mean = [&](Domain d) -> std::optional<double> {
        const auto k = static_cast<std::size_t>(d);
        if (n[k] == 0) return std::nullopt;
        return sum[k] / static_cast<double>(n[k]);
    };
    return {mean(Domain::SolidBody), mean(Domain::Fluid), mean(Domain::Optical)};
}

QuadrantSplit split_judge_corpus(std::vector<std::string> generators, std::vector<std::string> prompts,
                                 const std::string& heldout_generator, std::size_t n_heldout_prompts,
                                 std::uint64_t seed) {
    std::sort(generators.begin(), generators.end());
    std::sort(prompts.begin(), prompts.end());
    if (std::adjacent_find(generators.begin(), generators.end()) != generators.end() ||
        std::adjacent_find(prompts.begin(), prompts.end()) != prompts.end()) {
        throw ValidationError("split_judge_corpus: duplicate generator or prompt ids");
    }
    if (!std::binary_search(generators.begin(), generators.end(), heldout_generator)) {
        throw ValidationError("held-out generator '" + heldout_generator + "' is not in the generator list");
    }
    if (generators.size() < 2) throw ValidationError("split_judge_corpus needs at least two generators");
    if (n_heldout_prompts >= prompts.size()) {
        throw ValidationError("split_judge_corpus: n_heldout_prompts must be smaller than the prompt count");
    }
    SplitMix64 rng(seed);
    rng.shuffle(std::span<std::string>(prompts));
    const std::size_t n_seen = prompts.size() - n_heldout_prompts;
    std::set<std::string> unseen(prompts.begin() + static_cast<std::ptrdiff_t>(n_seen), prompts.end());

    QuadrantSplit out;
    out.unseen_prompts.assign(unseen.begin(), unseen.end());
    std::sort(prompts.begin(), prompts.end());
    for (const auto& g : generators) {
        const bool held_g = g == heldout_generator;
        for (const auto& p : prompts) {
            const bool held_p = unseen.contains(p);
            auto& bucket = held_g ? (held_p ? out.test_both : out.test_model) : (held_p ? out.test_prompt : out.train);
            bucket.emplace_back(g, p);
        }
    }
    return out;
}

LeaderboardRow summarize_verdicts(const std::string& model, std::span<const JudgeVerdict> verdicts,
                                  const LawDomainMap& map) {
    LeaderboardRow row;
    row.model = model;
    row.sa = per_dimension_mean(verdicts, "sa");
    row.ptv = per_dimension_mean(verdicts, "ptv");
    row.persistence = per_dimension_mean(verdicts, "persistence");
    std::vector<LawUnit> units;
    std::set<std::string> videos;
    for (const auto& v : verdicts) {
        videos.insert(v.video_id);
        if (!is_general_dimension(v.dimension)) units.push_back({v.video_id, v.dimension, v.score});
    }
    const auto dm = domain_means(units, map);
    row.solid_body = dm.solid_body;
    row.fluid = dm.fluid;
    row.optical = dm.optical;
    row.overall = overall_score({row.sa, row.ptv, row.persistence}, units);
    row.videos = videos.size();
    row.units = units.size();
    return row;
}

std::string render_leaderboard(std::span<const LeaderboardRow> rows) {
    std::size_t name_w = 5;
    for (const auto& r : rows) name_w = std::max(name_w, r.model.size());
    const auto cell = [](const std::optional<double>& v) { return v ? fixed2(*v) : std::string("-"); };
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s %6s %6s %8s %10s %6s %7s %7s\n", static_cast<int>(name_w), "Model", "SA",
                  "PTV", "Persist.", "Solid-Body", "Fluid", "Optical", "Overall");
    out += buf;
    out += std::string(name_w + 62, '-') + "\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-*s %6s %6s %8s %10s %6s %7s %7s\n", static_cast<int>(name_w),
                      r.model.c_str(), fixed2(r.sa).c_str(), fixed2(r.ptv).c_str(), fixed2(r.persistence).c_str(),
                      cell(r.solid_body).c_str(), cell(r.fluid).c_str(), cell(r.optical).c_str(),
                      fixed2(r.overall).c_str());
        out += buf;
    }
    return out;
}

Json to_json(const LeaderboardRow& row) {
    const auto opt = [](const std::optional<double>& v) { return v ? Json(fixed2(*v)) : Json(nullptr); };
    return {{"model", row.model},
            {"sa", fixed2(row.sa)},
            {"ptv", fixed2(row.ptv)},
            {"persistence", fixed2(row.persistence)},
            {"solid_body", opt(row.solid_body)},
            {"fluid", opt(row.fluid)},
            {"optical", opt(row.optical)},
            {"overall", fixed2(row.overall)},
            {"videos", row.videos},
            {"units", row.units}};
}

}  // namespace physpref
