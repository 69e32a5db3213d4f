// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "commands.hpp"
#include "physpref/curation.hpp"
#include "physpref/hashing.hpp"
#include "physpref/rng.hpp"
#include "physpref/toyworld.hpp"

namespace physpref::app {

namespace {

template <typename T>
T get_or(const Json& section, const char* key, T fallback, const std::string& where) {
    const auto it = section.find(key);
    if (it == section.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const Json::exception&) {
        throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
    }
}

QuotaMap class_weights(const Json& value, const std::string& where) {
    if (value.is_string() && value.get<std::string>() == "reference") return reference_quotas();
    if (value.is_object()) {
        try {
            return quotas_from_json(value);
        } catch (const Error& e) {
            throw ConfigError("config key '" + where + "': " + e.what());
        }
    }
    throw ConfigError("config key '" + where + "' must be \"reference\" or a class map");
}

QCConfig qc_from_json(const Json& j) {
    QCConfig q;
    const std::string w = "pipeline.qc";
    q.constancy_threshold = get_or(j, "constancy_threshold", q.constancy_threshold, w);
    q.constancy_min_records = get_or(j, "constancy_min_records", q.constancy_min_records, w);
    q.copy_paste_threshold = get_or(j, "copy_paste_threshold", q.copy_paste_threshold, w);
    q.copy_paste_min_videos = get_or(j, "copy_paste_min_videos", q.copy_paste_min_videos, w);
    q.peer_mae_threshold = get_or(j, "peer_mae_threshold", q.peer_mae_threshold, w);
    q.clip_duration_seconds = get_or(j, "clip_duration_seconds", q.clip_duration_seconds, w);
    q.telemetry_fraction = get_or(j, "telemetry_fraction", q.telemetry_fraction, w);
    q.min_flags_to_remove = get_or(j, "min_flags_to_remove", q.min_flags_to_remove, w);
    return q;
}

Json qc_to_json(const QCConfig& q) {
    return {{"constancy_threshold", q.constancy_threshold},
            {"constancy_min_records", q.constancy_min_records},
            {"copy_paste_threshold", q.copy_paste_threshold},
            {"copy_paste_min_videos", q.copy_paste_min_videos},
            {"peer_mae_threshold", q.peer_mae_threshold},
            {"clip_duration_seconds", q.clip_duration_seconds},
            {"telemetry_fraction", q.telemetry_fraction},
            {"min_flags_to_remove", q.min_flags_to_remove}};
}

std::vector<double> frame_vector(const Tensor4& frames, int k) {
    const auto& s = frames.shape();
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(s.c) * s.frame_size());
    for (int c = 0; c < s.c; ++c) {
        const double* p = frames.data() + frames.index(c, k, 0, 0);
        v.insert(v.end(), p, p + s.frame_size());
    }
    return v;
}

ClipScoreRecord clip_scores(const std::string& id, const ToyClip& clip) {
    std::vector<std::vector<double>> vecs;
    for (int k = 0; k < clip.frames.shape().t; ++k) vecs.push_back(frame_vector(clip.frames, k));
    ClipScoreRecord r;
    r.clip_id = id;
    r.adjacent_cosine_mean = adjacent_similarity(vecs);
    double motion = 0.0;
    for (std::size_t k = 1; k < clip.centers.size(); ++k) {
        motion += std::hypot(clip.centers[k][0] - clip.centers[k - 1][0], clip.centers[k][1] - clip.centers[k - 1][1]);
    }
    r.flow_motion_score = clip.centers.size() > 1 ? motion / static_cast<double>(clip.centers.size() - 1) : 0.0;
    return r;
}

std::string jsonl_of(const std::vector<Json>& rows) { return to_jsonl(rows); }

}  // namespace

// ---- shared helpers --------------------------------------------------------

std::map<std::string, PromptInfo> read_prompts(const fs::path& path) {
    std::map<std::string, PromptInfo> out;
    for (const auto& line : read_jsonl(path)) {
        check_fields(line.value, {"prompt_id", "text", "law", "event_class"}, {"prompt_id", "text"}, path.string(),
                     line.line);
        PromptInfo p;
        p.prompt_id = line.value.at("prompt_id").get<std::string>();
        p.text = line.value.at("text").get<std::string>();
        p.law = line.value.value("law", std::string());
        p.event_class = line.value.value("event_class", std::string());
        if (!out.emplace(p.prompt_id, p).second) {
            throw ValidationError(path.string() + ":" + std::to_string(line.line) + ": duplicate prompt '" +
                                  p.prompt_id + "'");
        }
    }
    return out;
}

LatentStore::LatentStore(const fs::path& path) : path_(path), tensors_(read_tensors(path)) {}

const Tensor4& LatentStore::get(const std::string& key) const {
    const auto it = tensors_.find(key);
    if (it == tensors_.end()) throw IntegrityError(path_.string() + ": no tensor '" + key + "'");
    return it->second;
}

const Tensor4& LatentStore::latent(const std::string& video_id) const { return get("x1/" + video_id); }

ConditioningPack LatentStore::conditioning(const PromptInfo& prompt) const {
    ConditioningPack pack;
    pack.z_c = get("zc/" + prompt.prompt_id);
    pack.mask = get("mask");
    pack.ctx_features = get("feat/" + prompt.prompt_id).values();
    pack.text_ctx = text_embedding(prompt.text);
    return pack;
}

std::vector<DpoExample> dpo_examples(std::span<const PreferencePair> pairs, const LatentStore& store,
                                     const std::map<std::string, PromptInfo>& prompts) {
    std::vector<DpoExample> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        const auto it = prompts.find(p.prompt_id);
        if (it == prompts.end()) throw IntegrityError("pair " + p.key() + " names unknown prompt " + p.prompt_id);
        DpoExample ex;
        ex.key = p.key();
        ex.x1_w = store.latent(p.winner);
        ex.x1_l = store.latent(p.loser);
        ex.cond = store.conditioning(it->second);
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<PreferencePair> read_stage_pairs(const RunConfig& config, std::string_view stage,
                                             std::string_view artifact) {
    return read_pairs(stage_artifact(config, stage, artifact));
}

// ---- toygen -----------------------------------------------------------------

int cmd_toygen(const RunConfig& config) {
    const auto sec = config.section("toygen");
    const std::string w = "toygen";
    const auto n_pairs = get_or<std::size_t>(sec, "n_pairs", 400, w);
    const auto spam = get_or<int>(sec, "spam_raters", 0, w);
    const auto missing = get_or<std::size_t>(sec, "missing_images", 0, w);
    const int T = get_or<int>(sec, "frames", 49, w);
    const int H = get_or<int>(sec, "height", 64, w);
    const int W = get_or<int>(sec, "width", 64, w);
    const int R = get_or<int>(sec, "conditioning_frames", kConditioningFrames, w);
    const auto mix = class_weights(sec.value("class_mix", Json("reference")), w + ".class_mix");
    if (missing > n_pairs) throw ConfigError("config key 'toygen.missing_images' exceeds toygen.n_pairs");
    const std::uint64_t seed = config.seed();

    RunLock lock(config.run_dir());
    StageWriter out(config, "toygen");
    const auto ds = make_pref_dataset(n_pairs, mix, seed, spam);

    std::vector<std::size_t> order(ds.pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    SplitMix64 miss_rng(derive_seed(seed, "missing_images"));
    miss_rng.shuffle(std::span<std::size_t>(order));
    const std::set<std::size_t> drop_image(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(missing));

    const auto images = out.directory_artifact("images");
    TensorMap latents;
    std::vector<Json> prompts, pair_rows, scores;
    std::vector<std::string> videos;
    std::map<std::string, std::int64_t> class_hist;
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
        const auto& p = ds.pairs[i];
        const auto [clean, bad] = render_pair(p, T, H, W);
        latents["x1/" + p.winner] = ToyCodec::encode(clean.frames);
        latents["x1/" + p.loser] = ToyCodec::encode(bad.frames);
        const auto cond = make_conditioning(clean.frames, R, T, p.prompt);
        latents["zc/" + p.prompt_id] = cond.z_c;
        Tensor4 feat({1, 1, 1, static_cast<int>(cond.ctx_features.size())}, Semantics::Condition);
        feat.values() = cond.ctx_features;
        latents["feat/" + p.prompt_id] = std::move(feat);
        if (i == 0) latents["mask"] = cond.mask;

        write_file_atomic(images / (p.winner + ".ppm"), frame_to_ppm(clean.frames, 0));
        if (!drop_image.count(i)) write_file_atomic(images / (p.loser + ".ppm"), frame_to_ppm(bad.frames, 0));

        prompts.push_back({{"prompt_id", p.prompt_id},
                           {"text", p.prompt},
                           {"law", p.law},
                           {"event_class", std::string(to_string(p.event_class))}});
        pair_rows.push_back(p.to_json());
        scores.push_back(to_json(clip_scores(p.winner, clean)));
        scores.push_back(to_json(clip_scores(p.loser, bad)));
        videos.push_back(p.winner);
        videos.push_back(p.loser);
        ++class_hist[std::string(to_string(p.event_class))];
    }
    std::sort(scores.begin(), scores.end(),
              [](const Json& a, const Json& b) { return a.at("clip_id").get<std::string>() < b.at("clip_id").get<std::string>(); });

    std::vector<Json> rating_rows;
    std::set<std::string> raters;
    for (const auto& r : ds.ratings) {
        rating_rows.push_back(to_json(r));
        raters.insert(r.rater_id);
    }
    out.artifact("ratings", "jsonl", jsonl_of(rating_rows));
    out.artifact("prompts", "jsonl", jsonl_of(prompts));
    out.artifact("pairs", "jsonl", jsonl_of(pair_rows));
    out.artifact("clip_scores", "jsonl", jsonl_of(scores));
    out.artifact("latents", "bin", serialize_tensors(latents));

    StageManifest m;
    m.stage = "toygen";
    m.params["toygen"] = {{"n_pairs", n_pairs},
                          {"class_mix", quotas_to_json(mix)},
                          {"spam_raters", spam},
                          {"missing_images", missing},
                          {"frames", T},
                          {"height", H},
                          {"width", W},
                          {"conditioning_frames", R}};
    m.params["seed"] = seed;
    m.counts = {{"pairs", static_cast<std::int64_t>(ds.pairs.size())},
                {"videos", static_cast<std::int64_t>(videos.size())},
                {"ratings", static_cast<std::int64_t>(ds.ratings.size())},
                {"raters", static_cast<std::int64_t>(raters.size())},
                {"missing_images", static_cast<std::int64_t>(missing)}};
    m.items = videos;
    m.extras["class_histogram"] = class_hist;
    out.log("generated " + std::to_string(ds.pairs.size()) + " pairs, " + std::to_string(ds.ratings.size()) +
            " ratings");
    out.commit(std::move(m));
    return 0;
}

// ---- curate -----------------------------------------------------------------

int cmd_curate(const RunConfig& config) {
    const auto sec = config.section("curate");
    const auto scores_path = config.input_path("clip_scores");
    const auto key_name = get_or<std::string>(sec, "key", "adjacent_cosine_mean", "curate");
    ScoreKey key;
    try {
        key = score_key_from_string(key_name);
    } catch (const Error& e) {
        throw ConfigError(std::string("config key 'curate.key': ") + e.what());
    }
    const auto records = read_clip_scores(scores_path);

    RunLock lock(config.run_dir());
    StageWriter out(config, "curate");
    double lo = 0.0, hi = 0.0;
    Json band_params;
    if (sec.contains("band")) {
        const auto b = get_or<std::vector<double>>(sec, "band", {}, "curate");
        if (b.size() != 2 || !(b[0] <= b[1])) throw ConfigError("config key 'curate.band' must be [lo, hi] with lo <= hi");
        lo = b[0];
        hi = b[1];
        band_params = {{"band", b}};
    } else {
        const auto pb = get_or<std::vector<double>>(sec, "percentile_band", {5.0, 95.0}, "curate");
        if (pb.size() != 2) throw ConfigError("config key 'curate.percentile_band' must be [lo_pct, hi_pct]");
        std::tie(lo, hi) = percentile_band(records, key, pb[0], pb[1]);
        band_params = {{"percentile_band", pb}};
    }
    const auto split = band_filter(records, key, lo, hi);
    auto rows = [](const std::vector<ClipScoreRecord>& v) {
        std::vector<Json> r;
        for (const auto& x : v) r.push_back(to_json(x));
        return to_jsonl(r);
    };
    out.artifact("kept", "jsonl", rows(split.kept));
    out.artifact("dropped_low", "jsonl", rows(split.dropped_low));
    out.artifact("dropped_high", "jsonl", rows(split.dropped_high));

    StageManifest m;
    m.stage = "curate";
    m.params["curate"] = band_params;
    m.params["curate"]["key"] = std::string(to_string(key));
    m.params["curate"]["lo"] = lo;
    m.params["curate"]["hi"] = hi;
    m.params["input_sha256"] = sha256_file(scores_path);
    m.counts = {{"records", static_cast<std::int64_t>(records.size())},
                {"kept", static_cast<std::int64_t>(split.kept.size())},
                {"dropped_low", static_cast<std::int64_t>(split.dropped_low.size())},
                {"dropped_high", static_cast<std::int64_t>(split.dropped_high.size())}};
    for (const auto& r : split.kept) m.items.push_back(r.clip_id);
    out.log("kept " + std::to_string(split.kept.size()) + " of " + std::to_string(records.size()) + " clips in [" +
            shortest_decimal(lo) + ", " + shortest_decimal(hi) + "]");
    out.commit(std::move(m));
    return 0;
}

// ---- pipeline ----------------------------------------------------------------

namespace {

void stage_t0(const RunConfig& config) {
    const auto sec = config.section("pipeline");
    const auto ratings_path = config.input_path("ratings");
    const auto qc = qc_from_json(sec.value("qc", Json::object()));
    const auto records = ingest_ratings(ratings_path);
    StageWriter out(config, "t0");
    auto res = run_t0(records, qc);
    std::vector<Json> videos, reports;
    for (const auto& v : res.videos) videos.push_back(to_json(v));
    for (const auto& r : res.qc.reports) reports.push_back(to_json(r));
    out.artifact("videos", "jsonl", to_jsonl(videos));
    out.artifact("qc_reports", "jsonl", to_jsonl(reports));
    res.manifest.params["qc"] = qc_to_json(qc);
    res.manifest.params["ratings_sha256"] = sha256_file(ratings_path);
    out.log("raters retained " + std::to_string(res.qc.retained_raters.size()) + " of " +
            std::to_string(res.qc.reports.size()) + "; videos scored " + std::to_string(res.videos.size()));
    out.commit(std::move(res.manifest));
}

void stage_t1(const RunConfig& config) {
    const auto sec = config.section("pipeline");
    const std::string w = "pipeline";
    const double margin_min = get_or(sec, "margin_min", 1.0, w);
    const int r_min = get_or(sec, "r_min", 2, w);
    SplitFractions f;
    const auto split_sec = sec.value("split", Json::object());
    f.train = get_or(split_sec, "train", f.train, w + ".split");
    f.val = get_or(split_sec, "val", f.val, w + ".split");
    f.heldout = get_or(split_sec, "heldout", f.heldout, w + ".split");
    const auto prompts = read_prompts(config.input_path("prompts"));

    std::vector<VideoEntry> videos;
    for (const auto& line : read_jsonl(stage_artifact(config, "t0", "videos"))) videos.push_back(video_from_json(line.value));

    StageWriter out(config, "t1");
    T1Stats stats;
    auto pairs = t1_enumerate_pairs(videos, margin_min, r_min, &stats);
    std::map<std::string, std::string> texts;
    for (const auto& [id, p] : prompts) texts[id] = p.text;
    label_event_classes(pairs, texts);
    const auto split = t1_split_prompts(pairs, f, config.seed());
    out.artifact("pairs", "jsonl", pairs_to_jsonl(pairs));
    out.artifact("train", "jsonl", pairs_to_jsonl(split.train));
    out.artifact("val", "jsonl", pairs_to_jsonl(split.val));
    out.artifact("heldout", "jsonl", pairs_to_jsonl(split.heldout));
    const Json params = {{"margin_min", margin_min},
                         {"r_min", r_min},
                         {"fractions", {{"train", f.train}, {"val", f.val}, {"heldout", f.heldout}}},
                         {"seed", config.seed()}};
    auto m = make_t1_manifest(pairs, split, stats, params);
    out.log("retained " + std::to_string(pairs.size()) + " pairs; train/val/heldout " +
            std::to_string(split.train.size()) + "/" + std::to_string(split.val.size()) + "/" +
            std::to_string(split.heldout.size()));
    out.commit(std::move(m));
}

void stage_t2(const RunConfig& config) {
    const auto images = config.input_path("images");
    const auto train = read_stage_pairs(config, "t1", "train");
    StageWriter out(config, "t2");
    auto res = t2_resolve_conditioning(train, images);
    out.artifact("survivors", "jsonl", pairs_to_jsonl(res.survivors));
    std::vector<Json> dropped;
    for (const auto& d : res.dropped) dropped.push_back({{"key", d.key}, {"missing_videos", d.missing_videos}});
    out.artifact("dropped", "jsonl", to_jsonl(dropped));
    out.log("survivors " + std::to_string(res.survivors.size()) + ", dropped " + std::to_string(res.dropped.size()));
    out.commit(std::move(res.manifest));
}

QuotaMap configured_quotas(const Json& sec) {
    const auto q = sec.value("quotas", Json("reference"));
    if (q.is_object() && q.contains("scale_to")) {
        const auto weights = class_weights(q.value("weights", Json("reference")), "pipeline.quotas.weights");
        return scale_quotas(weights, q.at("scale_to").get<std::size_t>());
    }
    return class_weights(q, "pipeline.quotas");
}

void stage_t3(const RunConfig& config) {
    const auto sec = config.section("pipeline");
    const auto quotas = configured_quotas(sec);
    const auto survivors = read_stage_pairs(config, "t2", "survivors");
    StageWriter out(config, "t3");
    auto res = t3_quota_sample(survivors, quotas, config.seed(), {{"quotas", quotas_to_json(quotas)}});
    out.artifact("trainset", "jsonl", pairs_to_jsonl(res.subset));
    out.log("sampled " + std::to_string(res.subset.size()) + " pairs from a pool of " +
            std::to_string(survivors.size()));
    out.commit(std::move(res.manifest));
}

}  // namespace

int cmd_pipeline(const RunConfig& config, const std::vector<std::string>& stages) {
    static const std::vector<std::string> all = {"t0", "t1", "t2", "t3"};
    const auto& run = stages.empty() ? all : stages;
    for (const auto& s : run) {
        if (std::find(all.begin(), all.end(), s) == all.end()) {
            throw ConfigError("unknown pipeline stage '" + s + "' (expected t0, t1, t2 or t3)");
        }
    }
    RunLock lock(config.run_dir());
    for (const auto& s : run) {
        if (s == "t0") stage_t0(config);
        if (s == "t1") stage_t1(config);
        if (s == "t2") stage_t2(config);
        if (s == "t3") stage_t3(config);
    }
    return 0;
}

// ---- verify -------------------------------------------------------------------

int cmd_verify(const RunConfig& config) {
    const auto run = config.run_dir();
    if (!fs::is_directory(run)) throw IoError("no run directory " + run.string());
    std::vector<fs::path> stage_dirs;
    for (const auto& e : fs::directory_iterator(run)) {
        const auto name = e.path().filename().string();
        if (e.is_directory() && fs::is_regular_file(e.path() / "manifest.json")) stage_dirs.push_back(e.path());
    }
    std::sort(stage_dirs.begin(), stage_dirs.end());
    int problems = 0;
    for (const auto& dir : stage_dirs) {
        const auto issues = audit_stage(dir);
        for (const auto& i : issues) std::cerr << "verify: " << i << "\n";
        problems += static_cast<int>(issues.size());
        std::cout << (issues.empty() ? "ok      " : "FAILED  ") << dir.filename().string() << "\n";
    }
    const bool have_funnel = fs::exists(run / "t1") && fs::exists(run / "t2") && fs::exists(run / "t3");
    if (have_funnel) {
        try {
            const auto report = verify_funnel(read_stage_manifest(config, "t1"), read_stage_manifest(config, "t2"),
                                              read_stage_manifest(config, "t3"));
            std::cout << report.table();
        } catch (const Error& e) {
            std::cerr << "verify: funnel: " << e.what() << "\n";
            ++problems;
        }
    }
    if (stage_dirs.empty()) {
        std::cerr << "verify: no published stages under " << run.string() << "\n";
        return 1;
    }
    return problems == 0 ? 0 : 1;
}

}  // namespace physpref::app
