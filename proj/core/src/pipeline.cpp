// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "physpref/hashing.hpp"
#include "physpref/rng.hpp"

namespace physpref {

namespace fs = std::filesystem;

namespace {

constexpr double kMarginEps = 1e-9;

std::vector<std::string> split_key(const std::string& key) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto bar = key.find('|', start);
        parts.push_back(key.substr(start, bar - start));
        if (bar == std::string::npos) break;
        start = bar + 1;
    }
    if (parts.size() != 4) {
        throw IntegrityError("malformed pair key '" + key + "'");
    }
    return parts;
}

Json optional_string(const std::optional<std::string>& s) {
    return s ? Json(*s) : Json(nullptr);
}

std::optional<std::string> read_optional_string(const Json& j, const char* field) {
    const auto it = j.find(field);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

}  // namespace

// ---- records --------------------------------------------------------------

Json to_json(const VideoEntry& v) {
    return {{"video_id", v.video_id},
            {"prompt_id", v.prompt_id},
            {"group_id", v.group_id},
            {"generator_id", v.generator_id},
            {"s_score", v.s_score},
            {"rater_count", v.rater_count},
            {"first_frame_path", optional_string(v.first_frame_path)},
            {"first_frame_sha256", optional_string(v.first_frame_sha256)}};
}

VideoEntry video_from_json(const Json& j) {
    VideoEntry v;
    v.video_id = j.at("video_id").get<std::string>();
    v.prompt_id = j.at("prompt_id").get<std::string>();
    v.group_id = j.at("group_id").get<std::string>();
    v.generator_id = j.value("generator_id", std::string{});
    v.s_score = j.at("s_score").get<double>();
    v.rater_count = j.at("rater_count").get<int>();
    v.first_frame_path = read_optional_string(j, "first_frame_path");
    v.first_frame_sha256 = read_optional_string(j, "first_frame_sha256");
    return v;
}

std::string PreferencePair::key() const {
    return prompt_id + "|" + group_id + "|" + winner + "|" + loser;
}

std::string prompt_of_key(const std::string& key) { return split_key(key)[0]; }
std::string group_of_key(const std::string& key) { return split_key(key)[1]; }

bool pair_order(const PreferencePair& a, const PreferencePair& b) {
    return std::tie(a.group_id, a.winner, a.loser) < std::tie(b.group_id, b.winner, b.loser);
}

Json to_json(const PreferencePair& p) {
    return {{"winner", p.winner},
            {"loser", p.loser},
            {"prompt_id", p.prompt_id},
            {"group_id", p.group_id},
            {"margin", p.margin},
            {"event_class", std::string(to_string(p.event_class))},
            {"winner_frame_sha256", optional_string(p.winner_frame_sha256)},
            {"loser_frame_sha256", optional_string(p.loser_frame_sha256)}};
}

PreferencePair pair_from_json(const Json& j) {
    PreferencePair p;
    p.winner = j.at("winner").get<std::string>();
    p.loser = j.at("loser").get<std::string>();
    p.prompt_id = j.at("prompt_id").get<std::string>();
    p.group_id = j.at("group_id").get<std::string>();
    p.margin = j.at("margin").get<double>();
    p.event_class = event_class_from_string(j.value("event_class", std::string("unclassified")));
    p.winner_frame_sha256 = read_optional_string(j, "winner_frame_sha256");
    p.loser_frame_sha256 = read_optional_string(j, "loser_frame_sha256");
    return p;
}

std::vector<PreferencePair> read_pairs(const fs::path& path) {
    std::vector<PreferencePair> out;
    for (const auto& row : read_jsonl(path)) {
        try {
            out.push_back(pair_from_json(row.value));
        } catch (const Json::exception& e) {
            throw ParseError(path.string(), row.line, e.what());
        }
    }
    return out;
}

std::string pairs_to_jsonl(std::span<const PreferencePair> pairs) {
    std::string out;
    for (const auto& p : pairs) {
        out += to_json(p).dump();
        out += '\n';
    }
    return out;
}

// ---- T0 -------------------------------------------------------------------

std::vector<VideoEntry> build_video_entries(std::span<const RatingRecord> records,
                                            std::vector<std::string>* excluded) {
    std::map<std::string, const RatingRecord*> first_seen;
    std::set<std::pair<std::string, std::string>> memberships;  // (group, video)
    for (const auto& r : records) {
        const auto [it, inserted] = first_seen.emplace(r.video_id, &r);
        if (!inserted && (it->second->prompt_id != r.prompt_id ||
                          it->second->generator_id != r.generator_id)) {
            throw IntegrityError("video " + r.video_id + " appears under two prompts or generators");
        }
        memberships.emplace(r.group_id, r.video_id);
    }

    std::map<std::string, std::pair<double, int>> scores;
    for (const auto& [video, record] : first_seen) {
        try {
            const double s = aggregate_score(video, records);
            const auto raters = complete_triple_raters(video, records);
            scores[video] = {s, static_cast<int>(raters.size())};
        } catch (const UndefinedScoreError&) {
            if (excluded) excluded->push_back(video);
        }
    }

    std::vector<VideoEntry> out;
    for (const auto& [group, video] : memberships) {
        const auto it = scores.find(video);
        if (it == scores.end()) continue;
        const auto* r = first_seen.at(video);
        VideoEntry v;
        v.video_id = video;
        v.prompt_id = r->prompt_id;
        v.group_id = group;
        v.generator_id = r->generator_id;
        v.s_score = it->second.first;
        v.rater_count = it->second.second;
        out.push_back(std::move(v));
    }
    return out;
}

T0Result run_t0(std::span<const RatingRecord> records, const QCConfig& qc) {
    T0Result result;
    result.qc = qc_filter_raters(records, qc);
    const auto kept = keep_raters(records, result.qc.retained_raters);
    result.videos = build_video_entries(kept, &result.excluded_videos);

    auto& m = result.manifest;
    m.stage = "T0";
    m.params = {{"constancy_threshold", qc.constancy_threshold},
                {"constancy_min_records", qc.constancy_min_records},
                {"copy_paste_threshold", qc.copy_paste_threshold},
                {"copy_paste_min_videos", qc.copy_paste_min_videos},
                {"peer_mae_threshold", qc.peer_mae_threshold},
                {"clip_duration_seconds", qc.clip_duration_seconds},
                {"telemetry_fraction", qc.telemetry_fraction},
                {"min_flags_to_remove", qc.min_flags_to_remove}};
    m.counts["records"] = static_cast<std::int64_t>(records.size());
    m.counts["raters"] = static_cast<std::int64_t>(result.qc.reports.size());
    m.counts["raters_retained"] = static_cast<std::int64_t>(result.qc.retained_raters.size());
    m.counts["records_retained"] = static_cast<std::int64_t>(kept.size());
    m.counts["videos_scored"] = static_cast<std::int64_t>(result.videos.size());
    m.counts["videos_excluded"] = static_cast<std::int64_t>(result.excluded_videos.size());
    Json scores = Json::object();
    Json raters = Json::object();
    for (const auto& v : result.videos) {
        const std::string key = v.group_id + "|" + v.video_id;
        m.items.push_back(key);
        scores[key] = fixed2(v.s_score);
        raters[key] = v.rater_count;
    }
    Json removed = Json::array();
    for (const auto& r : result.qc.reports) {
        if (r.removed) removed.push_back(r.rater_id);
    }
    m.extras = {{"scores", scores}, {"rater_counts", raters}, {"removed_raters", removed},
                {"excluded_videos", result.excluded_videos}};
    m.seal();
    return result;
}

// ---- T1 -------------------------------------------------------------------

std::vector<PreferencePair> t1_enumerate_pairs(std::span<const VideoEntry> videos, double margin_min,
                                               int r_min, T1Stats* stats) {
    std::map<std::string, std::vector<const VideoEntry*>> groups;
    for (const auto& v : videos) {
        groups[v.group_id].push_back(&v);
    }
    T1Stats local;
    std::vector<PreferencePair> out;
    for (auto& [group, members] : groups) {
        std::sort(members.begin(), members.end(),
                  [](const VideoEntry* a, const VideoEntry* b) { return a->video_id < b->video_id; });
        for (std::size_t i = 0; i < members.size(); ++i) {
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                const VideoEntry* a = members[i];
                const VideoEntry* b = members[j];
                if (a->prompt_id != b->prompt_id || a->group_id != b->group_id) {
                    throw IntegrityError("cross-prompt pairing in group " + group + ": " + a->video_id +
                                         " (" + a->prompt_id + ") vs " + b->video_id + " (" +
                                         b->prompt_id + ")");
                }
                const double diff = a->s_score - b->s_score;
                if (std::abs(diff) < 1e-12) {
                    ++local.ties;
                    continue;
                }
                if (std::abs(diff) < margin_min - kMarginEps) {
                    ++local.low_margin;
                    continue;
                }
                if (a->rater_count < r_min || b->rater_count < r_min) {
                    ++local.rater_filtered;
                    continue;
                }
                const VideoEntry* w = diff > 0 ? a : b;
                const VideoEntry* l = diff > 0 ? b : a;
                PreferencePair p;
                p.winner = w->video_id;
                p.loser = l->video_id;
                p.prompt_id = w->prompt_id;
                p.group_id = group;
                p.margin = w->s_score - l->s_score;
                out.push_back(std::move(p));
                ++local.retained;
            }
        }
    }
    std::sort(out.begin(), out.end(), pair_order);
    if (stats) *stats = local;
    return out;
}

std::array<std::size_t, 3> split_counts(std::size_t n, const SplitFractions& f) {
    const double sum = f.train + f.val + f.heldout;
    if (std::abs(sum - 1.0) > 1e-9 || f.train < 0 || f.val < 0 || f.heldout < 0) {
        throw ValidationError("split fractions must be nonnegative and sum to 1");
    }
    if (n < 3) {
        throw SelectionError("need at least 3 prompts for a three-way split, got " + std::to_string(n));
    }
    const auto floor_count = [n](double frac) {
        return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
    };
    std::array<std::size_t, 3> counts = {floor_count(f.train), floor_count(f.val), floor_count(f.heldout)};
    counts[0] += n - (counts[0] + counts[1] + counts[2]);
    const std::array<double, 3> fracs = {f.train, f.val, f.heldout};
    for (std::size_t k = 1; k < 3; ++k) {
        if (fracs[k] > 0 && counts[k] == 0 && counts[0] > 1) {
            --counts[0];
            ++counts[k];
        }
    }
    return counts;
}

PromptSplit t1_split_prompts(std::span<const PreferencePair> pairs, const SplitFractions& fractions,
                             std::uint64_t seed) {
    std::set<std::string> prompt_set;
    for (const auto& p : pairs) prompt_set.insert(p.prompt_id);
    std::vector<std::string> prompts(prompt_set.begin(), prompt_set.end());
    const auto counts = split_counts(prompts.size(), fractions);

    SplitMix64 rng(seed);
    rng.shuffle(std::span<std::string>(prompts));

    PromptSplit split;
    std::map<std::string, int> bucket;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const int b = i < counts[0] ? 0 : (i < counts[0] + counts[1] ? 1 : 2);
        bucket[prompts[i]] = b;
        (b == 0 ? split.train_prompts : b == 1 ? split.val_prompts : split.heldout_prompts)
            .push_back(prompts[i]);
    }
    for (auto* list : {&split.train_prompts, &split.val_prompts, &split.heldout_prompts}) {
        std::sort(list->begin(), list->end());
    }
    for (const auto& p : pairs) {
        const int b = bucket.at(p.prompt_id);
        (b == 0 ? split.train : b == 1 ? split.val : split.heldout).push_back(p);
    }
    for (auto* list : {&split.train, &split.val, &split.heldout}) {
        std::sort(list->begin(), list->end(), pair_order);
    }
    return split;
}

StageManifest make_t1_manifest(std::span<const PreferencePair> pairs, const PromptSplit& split,
                               const T1Stats& stats, const Json& params) {
    StageManifest m;
    m.stage = "T1";
    m.params = params;
    m.params["split"] = {{"train", split.train_prompts},
                         {"val", split.val_prompts},
                         {"heldout", split.heldout_prompts}};
    m.counts = {{"retained", static_cast<std::int64_t>(pairs.size())},
                {"ties", stats.ties},
                {"low_margin", stats.low_margin},
                {"rater_filtered", stats.rater_filtered},
                {"train", static_cast<std::int64_t>(split.train.size())},
                {"val", static_cast<std::int64_t>(split.val.size())},
                {"heldout", static_cast<std::int64_t>(split.heldout.size())}};
    Json margins = Json::object();
    for (const auto& p : pairs) {
        m.items.push_back(p.key());
        margins[p.key()] = fixed2(p.margin);
    }
    m.extras = {{"margins", margins}};
    m.seal();
    return m;
}

void label_event_classes(std::span<PreferencePair> pairs,
                         const std::map<std::string, std::string>& prompt_texts,
                         const EventRuleTable& rules) {
    for (auto& p : pairs) {
        const auto it = prompt_texts.find(p.prompt_id);
        p.event_class = it == prompt_texts.end() ? EventClass::Unclassified
                                                 : classify_event(it->second, rules);
    }
}

// ---- T2 -------------------------------------------------------------------

std::optional<fs::path> resolve_first_frame(const fs::path& root, const std::string& video_id) {
    std::vector<fs::path> found;
    for (const auto ext : kImageExtensions) {
        fs::path candidate = root / (video_id + std::string(ext));
        std::error_code ec;
        const auto status = fs::status(candidate, ec);
        if (ec && ec != std::errc::no_such_file_or_directory) {
            throw IoError("cannot stat " + candidate.string() + ": " + ec.message());
        }
        if (!fs::exists(status)) continue;
        if (!fs::is_regular_file(status)) {
            throw IoError(candidate.string() + " exists but is not a regular file");
        }
        found.push_back(std::move(candidate));
    }
    if (found.size() > 1) {
        throw IntegrityError("ambiguous first frame for " + video_id + ": " + found[0].string() +
                             " and " + found[1].string());
    }
    if (found.empty()) return std::nullopt;
    return found.front();
}

T2Result t2_resolve_conditioning(std::span<const PreferencePair> pairs, const fs::path& image_root,
                                 const Json& params) {
    std::error_code ec;
    if (!fs::is_directory(image_root, ec)) {
        throw IoError("image root " + image_root.string() + " is not a readable directory");
    }
    T2Result result;
    std::map<std::string, std::optional<std::string>> cache;
    const auto digest_of = [&](const std::string& video) -> std::optional<std::string> {
        if (const auto it = cache.find(video); it != cache.end()) return it->second;
        std::optional<std::string> digest;
        if (const auto path = resolve_first_frame(image_root, video)) {
            digest = sha256_file(*path);
        }
        cache[video] = digest;
        return digest;
    };

    for (const auto& p : pairs) {
        const auto w = digest_of(p.winner);
        const auto l = digest_of(p.loser);
        if (!w || !l) {
            DroppedPair d{p.key(), {}};
            if (!w) d.missing_videos.push_back(p.winner);
            if (!l) d.missing_videos.push_back(p.loser);
            result.dropped.push_back(std::move(d));
            continue;
        }
        PreferencePair kept = p;
        kept.winner_frame_sha256 = w;
        kept.loser_frame_sha256 = l;
        result.digests[p.winner] = *w;
        result.digests[p.loser] = *l;
        result.survivors.push_back(std::move(kept));
    }
    std::sort(result.survivors.begin(), result.survivors.end(), pair_order);

    auto& m = result.manifest;
    m.stage = "T2";
    m.params = params;
    m.params["image_extensions"] = std::vector<std::string>(kImageExtensions.begin(), kImageExtensions.end());
    m.counts = {{"candidates", static_cast<std::int64_t>(pairs.size())},
                {"survivors", static_cast<std::int64_t>(result.survivors.size())},
                {"dropped", static_cast<std::int64_t>(result.dropped.size())}};
    for (const auto& p : result.survivors) m.items.push_back(p.key());
    Json dropped = Json::array();
    for (const auto& d : result.dropped) {
        dropped.push_back({{"key", d.key}, {"missing", d.missing_videos}});
    }
    m.extras = {{"digests", result.digests}, {"dropped", dropped}};
    m.seal();
    return result;
}

// ---- T3 -------------------------------------------------------------------

QuotaMap reference_quotas() {
    return {{EventClass::A, 513}, {EventClass::B, 93}, {EventClass::C, 168},
            {EventClass::D, 68},  {EventClass::E, 13}, {EventClass::F, 75},
            {EventClass::G, 55},  {EventClass::Unclassified, 15}};
}

QuotaMap scale_quotas(const QuotaMap& weights, std::size_t total) {
    std::uint64_t sum = 0;
    for (const auto& [c, w] : weights) sum += w;
    if (sum == 0) {
        throw ValidationError("scale_quotas: weights sum to zero");
    }
    // Integer shares and remainders, so equal remainders tie exactly.
    QuotaMap out;
    std::vector<std::pair<std::uint64_t, EventClass>> remainders;
    std::size_t assigned = 0;
    for (const auto& [c, w] : weights) {
        const std::uint64_t scaled = static_cast<std::uint64_t>(w) * total;
        out[c] = static_cast<std::size_t>(scaled / sum);
        assigned += out[c];
        remainders.emplace_back(scaled % sum, c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) {
        ++out[remainders[i % remainders.size()].second];
    }
    return out;
}

Json quotas_to_json(const QuotaMap& quotas) {
    Json j = Json::object();
    for (const auto& [c, q] : quotas) j[std::string(to_string(c))] = q;
    return j;
}

QuotaMap quotas_from_json(const Json& j) {
    QuotaMap out;
    for (const auto& [name, value] : j.items()) {
        if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
            throw ValidationError("quota for class '" + name + "' must be a nonnegative integer");
        }
        out[event_class_from_string(name)] = value.get<std::size_t>();
    }
    return out;
}

T3Result t3_quota_sample(std::span<const PreferencePair> pairs, const QuotaMap& quotas,
                         std::uint64_t seed, const Json& params) {
    std::map<EventClass, std::vector<PreferencePair>> pools;
    for (const auto& p : pairs) pools[p.event_class].push_back(p);

    for (const auto& [c, quota] : quotas) {
        const std::size_t available = pools.contains(c) ? pools.at(c).size() : 0;
        if (available < quota) {
            throw SelectionError("class " + std::string(to_string(c)) + " (" + std::string(describe(c)) +
                                 "): quota " + std::to_string(quota) + " exceeds pool " +
                                 std::to_string(available));
        }
    }

    T3Result result;
    auto& m = result.manifest;
    m.stage = "T3";
    m.params = params;
    m.params["quotas"] = quotas_to_json(quotas);
    m.params["seed"] = seed;
    m.counts["pool"] = static_cast<std::int64_t>(pairs.size());
    for (const auto& [c, quota] : quotas) {
        auto pool = pools[c];
        std::sort(pool.begin(), pool.end(), pair_order);
        SplitMix64 rng(derive_seed(seed, "class:" + std::string(to_string(c))));
        rng.shuffle(std::span<PreferencePair>(pool));
        result.subset.insert(result.subset.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quota));
        m.counts["class_" + std::string(to_string(c))] = static_cast<std::int64_t>(quota);
    }
    std::sort(result.subset.begin(), result.subset.end(), pair_order);
    m.counts["selected"] = static_cast<std::int64_t>(result.subset.size());
    for (const auto& p : result.subset) m.items.push_back(p.key());
    m.seal();
    return result;
}

// ---- funnel ---------------------------------------------------------------

namespace {

FunnelRow row_from_items(std::string stage, std::span<const std::string> items) {
    std::set<std::string> groups;
    std::set<std::string> prompts;
    for (const auto& key : items) {
        const auto parts = split_key(key);
        prompts.insert(parts[0]);
        groups.insert(parts[1]);
    }
    return {std::move(stage), static_cast<std::int64_t>(items.size()),
            static_cast<std::int64_t>(groups.size()), static_cast<std::int64_t>(prompts.size())};
}

std::int64_t count_of(const StageManifest& m, const std::string& name) {
    const auto it = m.counts.find(name);
    if (it == m.counts.end()) {
        throw IntegrityError(m.stage + " manifest lacks count '" + name + "'");
    }
    return it->second;
}

}  // namespace

FunnelReport verify_funnel(const StageManifest& t1, const StageManifest& t2, const StageManifest& t3) {
    for (const auto* m : {&t1, &t2, &t3}) {
        if (!m->verify()) {
            throw IntegrityError(m->stage + " manifest digest mismatch");
        }
    }
    if (t1.stage != "T1" || t2.stage != "T2" || t3.stage != "T3") {
        throw IntegrityError("verify_funnel expects T1, T2, T3 manifests in order");
    }

    const std::int64_t retained = count_of(t1, "retained");
    const std::int64_t candidates = count_of(t2, "candidates");
    const std::int64_t survivors = count_of(t2, "survivors");
    const std::int64_t selected = count_of(t3, "selected");
    if (retained != static_cast<std::int64_t>(t1.items.size()) ||
        survivors != static_cast<std::int64_t>(t2.items.size()) ||
        selected != static_cast<std::int64_t>(t3.items.size())) {
        throw IntegrityError("manifest counts disagree with item lists");
    }
    if (!(retained >= candidates && candidates >= survivors && survivors >= selected)) {
        throw IntegrityError("funnel not monotone: T1 " + std::to_string(retained) + ", T2 " +
                             std::to_string(candidates) + ", T3 pool " + std::to_string(survivors) +
                             ", trainset " + std::to_string(selected));
    }

    std::set<std::string> heldout;
    if (const auto it = t1.params.find("split"); it != t1.params.end() && it->contains("heldout")) {
        for (const auto& p : it->at("heldout")) heldout.insert(p.get<std::string>());
    } else {
        throw IntegrityError("T1 manifest lacks the heldout prompt list");
    }
    for (const auto* m : {&t2, &t3}) {
        for (const auto& key : m->items) {
            if (heldout.contains(prompt_of_key(key))) {
                throw IntegrityError("heldout prompt " + prompt_of_key(key) + " found in " + m->stage +
                                     " item " + key);
            }
        }
    }

    FunnelReport report;
    report.rows.push_back(row_from_items("T1 retained", t1.items));
    std::vector<std::string> heldout_items;
    for (const auto& key : t1.items) {
        if (heldout.contains(prompt_of_key(key))) heldout_items.push_back(key);
    }
    report.rows.push_back(row_from_items("  heldout", heldout_items));
    report.rows.push_back({"T2 cand. pool", candidates, std::nullopt, std::nullopt});
    report.rows.push_back(row_from_items("T3 RL pool", t2.items));
    report.rows.push_back(row_from_items("Trainset", t3.items));
    return report;
}

std::string FunnelReport::table() const {
    std::ostringstream out;
    const auto cell = [](const std::optional<std::int64_t>& v) {
        return v ? std::to_string(*v) : std::string("-");
    };
    char line[128];
    std::snprintf(line, sizeof line, "%-16s %9s %9s %9s\n", "Stage / pool", "#pairs", "#groups", "#prompts");
    out << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-16s %9lld %9s %9s\n", r.stage.c_str(),
                      static_cast<long long>(r.pairs), cell(r.groups).c_str(), cell(r.prompts).c_str());
        out << line;
    }
    return out.str();
}

}  // namespace physpref
