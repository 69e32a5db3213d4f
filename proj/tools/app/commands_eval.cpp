// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <memory>

#include "commands.hpp"
#include "physpref/bench.hpp"
#include "physpref/checkpoint.hpp"
#include "physpref/hashing.hpp"
#include "physpref/judge.hpp"
#include "physpref/oracle.hpp"

namespace physpref::app {

namespace {

const std::vector<std::string> kDefaultGenerators = {"reference", "corrupted", "base", "dpo"};

Tensor4 sample_latent(const ToyDenoiser& model, const ConditioningPack& cond, const Shape4& shape,
                      std::uint64_t seed, int steps) {
    SplitMix64 rng(seed);
    const Tensor4 x0 = gaussian_like(shape, rng);
    return euler_sample([&](const Tensor4& x, double tau) { return model.forward(x, cond, tau); }, x0, steps);
}

}  // namespace

int cmd_evaluate(const RunConfig& config) {
    const auto sec = config.section("evaluate");
    const auto mode = sec.value("mode", std::string("oracle"));
    if (mode != "oracle" && mode != "http") throw ConfigError("config key 'evaluate.mode' must be \"oracle\" or \"http\"");
    const int euler_steps = sec.value("euler_steps", 16);
    const int max_parallel = sec.value("max_parallel", 4);
    if (euler_steps < 1) throw ConfigError("config key 'evaluate.euler_steps' must be >= 1");
    if (max_parallel < 1) throw ConfigError("config key 'evaluate.max_parallel' must be >= 1");
    const auto generators = sec.value("generators", kDefaultGenerators);
    LawDomainMap domains = default_law_domains();
    if (sec.contains("law_domains")) {
        try {
            domains = law_domains_from_json(sec.at("law_domains"));
        } catch (const Error& e) {
            throw ConfigError(std::string("config key 'evaluate.law_domains': ") + e.what());
        }
    }

    std::unique_ptr<Judge> judge;
    std::map<std::string, std::map<std::string, int>> oracle_table;
    if (mode == "http") {
        const auto endpoint = sec.value("endpoint", std::string());
        if (endpoint.empty()) throw ConfigError("config key 'evaluate.endpoint' is required in http mode");
        const auto version = sec.value("judge_version", std::string());
        if (version.empty()) throw ConfigError("config key 'evaluate.judge_version' is required in http mode");
        judge = std::make_unique<HttpJudge>(endpoint, version, sec.value("timeout_seconds", 60));
    } else {
        judge = std::make_unique<OracleJudge>([&oracle_table](const std::string& video_id) {
            const auto it = oracle_table.find(video_id);
            if (it == oracle_table.end()) throw IntegrityError("oracle has no video '" + video_id + "'");
            return it->second;
        }, sec.value("judge_version", std::string("toy-latent-oracle/1")));
    }

    const LatentStore store(config.input_path("latents"));
    const auto prompts = read_prompts(config.input_path("prompts"));
    const auto heldout = read_stage_pairs(config, "t1", "heldout");
    std::map<std::string, std::unique_ptr<ToyDenoiser>> models;
    for (const auto& g : generators) {
        if (g == "base") models[g] = std::make_unique<ToyDenoiser>(Checkpoint::read(config.input_path("base_checkpoint")).model());
        else if (g == "dpo") models[g] = std::make_unique<ToyDenoiser>(Checkpoint::read(config.input_path("policy_checkpoint")).model());
        else if (g != "reference" && g != "corrupted") {
            throw ConfigError("config key 'evaluate.generators': unknown generator '" + g +
                              "' (expected reference, corrupted, base or dpo)");
        }
    }

    // One representative pair per held-out prompt: the first in pair order.
    std::map<std::string, PreferencePair> by_prompt;
    for (const auto& p : heldout) by_prompt.emplace(p.prompt_id, p);
    if (by_prompt.empty()) throw SelectionError("evaluate: the held-out split is empty");

    RunLock lock(config.run_dir());
    StageWriter out(config, "evaluate");
    std::map<std::string, std::vector<JudgeRequest>> requests_by_gen;
    std::vector<JudgeRequest> requests;
    std::vector<Json> residual_rows;
    for (const auto& [prompt_id, pair] : by_prompt) {
        const auto& info = prompts.at(prompt_id);
        const auto cond = store.conditioning(info);
        std::vector<std::string> laws;
        if (is_evaluated_law(info.law)) laws.push_back(info.law);
        for (const auto& g : generators) {
            Tensor4 latent;
            if (g == "reference") latent = store.latent(pair.winner);
            else if (g == "corrupted") latent = store.latent(pair.loser);
            else {
                latent = sample_latent(*models.at(g), cond, store.latent(pair.winner).shape(),
                                       derive_seed(config.seed(), "sample:" + prompt_id), euler_steps);
            }
            const int n_frames = 1 + ToyCodec::kTemporalStride * (latent.shape().t - 1);
            VideoRef ref{g + "/" + prompt_id, sha256_hex(tensor_bytes(latent)), n_frames, 16.0};
            if (mode == "oracle") {
                const auto res = latent_oracle_residuals(latent);
                oracle_table[ref.video_id] = latent_oracle_scores(res);
                auto row = res.to_json();
                row["video_id"] = ref.video_id;
                residual_rows.push_back(std::move(row));
            }
            for (auto& r : build_judge_queries(ref, info.text, laws, judge->version())) {
                requests.push_back(r);
                requests_by_gen[g].push_back(std::move(r));
            }
        }
    }
    out.log("judging " + std::to_string(requests.size()) + " requests for " + std::to_string(by_prompt.size()) +
            " held-out prompts");

    VerdictCache cache(config.run_dir() / "judge-cache" / "verdicts.jsonl");
    JudgeRunStats stats;
    const auto verdicts = run_judge(requests, *judge, cache, max_parallel, &stats);
    cache.flush();
    out.log("cache hits " + std::to_string(stats.cache_hits) + ", judge calls " + std::to_string(stats.calls));

    std::map<std::string, std::vector<JudgeVerdict>> by_gen;
    for (const auto& v : verdicts) by_gen[v.video_id.substr(0, v.video_id.find('/'))].push_back(v);
    std::vector<LeaderboardRow> rows;
    for (const auto& g : generators) rows.push_back(summarize_verdicts(g, by_gen[g], domains));
    const auto table = render_leaderboard(rows);
    std::cout << table;

    Json board = Json::array();
    for (const auto& r : rows) board.push_back(to_json(r));
    std::vector<Json> verdict_rows;
    for (const auto& v : verdicts) verdict_rows.push_back(to_json(v));
    out.artifact("leaderboard", "txt", table);
    out.artifact("leaderboard_json", "json", canonicalize(board).dump(2) + "\n");
    out.artifact("verdicts", "jsonl", to_jsonl(verdict_rows));
    if (!residual_rows.empty()) out.artifact("oracle_residuals", "jsonl", to_jsonl(residual_rows));

    StageManifest m;
    m.stage = "evaluate";
    m.params["evaluate"] = {{"mode", mode},
                            {"judge_version", judge->version()},
                            {"euler_steps", euler_steps},
                            {"generators", generators},
                            {"law_domains", to_json(domains)}};
    m.counts = {{"prompts", static_cast<std::int64_t>(by_prompt.size())},
                {"videos", static_cast<std::int64_t>(by_prompt.size() * generators.size())},
                {"requests", static_cast<std::int64_t>(requests.size())}};
    for (const auto& [g, reqs] : requests_by_gen) {
        for (const auto& r : reqs) m.items.push_back(r.cache_key);
    }
    m.extras["leaderboard"] = board;
    out.commit(std::move(m));
    return 0;
}

}  // namespace physpref::app
