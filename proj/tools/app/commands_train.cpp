// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <set>

#include "commands.hpp"
#include "physpref/checkpoint.hpp"
#include "physpref/hashing.hpp"
#include "physpref/stats.hpp"

namespace physpref::app {

namespace {

DenoiserConfig model_config(const RunConfig& config) {
    try {
        return DenoiserConfig::from_json(config.section("model"));
    } catch (const Error& e) {
        throw ConfigError(std::string("config key 'model': ") + e.what());
    }
}

FMConfig fm_config(const RunConfig& config) {
    auto sec = config.section("train_fm");
    if (!sec.contains("seed")) sec["seed"] = config.seed();
    try {
        return FMConfig::from_json(sec);
    } catch (const Error& e) {
        throw ConfigError(std::string("config key 'train_fm': ") + e.what());
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config key 'train_fm': ") + e.what());
    }
}

DPOConfig dpo_config(const RunConfig& config) {
    auto sec = config.section("train_dpo");
    if (!sec.contains("seed")) sec["seed"] = config.seed();
    try {
        return DPOConfig::from_json(sec);
    } catch (const Error& e) {
        throw ConfigError(std::string("config key 'train_dpo': ") + e.what());
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config key 'train_dpo': ") + e.what());
    }
}

std::string trajectory_jsonl(std::span<const TrajectoryPoint> traj) {
    std::vector<Json> rows;
    for (const auto& p : traj) rows.push_back(to_json(p));
    return to_jsonl(rows);
}

struct DpoInputs {
    Checkpoint base;
    std::vector<DpoExample> train;
    std::vector<DpoExample> val;
};

DpoInputs load_dpo_inputs(const RunConfig& config) {
    DpoInputs in;
    in.base = Checkpoint::read(config.input_path("base_checkpoint"));
    const LatentStore store(config.input_path("latents"));
    const auto prompts = read_prompts(config.input_path("prompts"));
    const auto trainset = read_stage_pairs(config, "t3", "trainset");
    const auto val = read_stage_pairs(config, "t1", "val");
    in.train = dpo_examples(trainset, store, prompts);
    in.val = dpo_examples(val, store, prompts);
    return in;
}

}  // namespace

int cmd_train_fm(const RunConfig& config) {
    const auto mc = model_config(config);
    const auto fc = fm_config(config);
    const LatentStore store(config.input_path("latents"));
    const auto prompts = read_prompts(config.input_path("prompts"));
    const auto train = read_stage_pairs(config, "t1", "train");

    // The base model learns the clean clips of the training prompts.
    std::map<std::string, std::string> winners;
    for (const auto& p : train) winners.emplace(p.winner, p.prompt_id);
    std::vector<LatentExample> data;
    for (const auto& [video, prompt] : winners) {
        data.push_back({video, store.latent(video), store.conditioning(prompts.at(prompt))});
    }

    RunLock lock(config.run_dir());
    StageWriter out(config, "train-fm");
    ToyDenoiser model(mc, config.seed());
    const auto report = train_fm(model, data, fc);
    std::vector<Json> log_rows;
    for (const auto& p : report.log) {
        log_rows.push_back({{"step", p.step}, {"loss", p.loss}});
        out.log("step " + std::to_string(p.step) + " loss " + shortest_decimal(p.loss));
    }
    const double final_loss = report.log.empty() ? 0.0 : report.log.back().loss;
    const auto ckpt = Checkpoint::capture(model, SplitMix64(derive_seed(fc.seed, "fm")),
                                          {{"stage", "train-fm"}, {"steps", report.steps}});
    out.artifact("checkpoint", "ckpt", ckpt.serialize());
    out.artifact("log", "jsonl", to_jsonl(log_rows));

    StageManifest m;
    m.stage = "train-fm";
    m.params["model"] = mc.to_json();
    m.params["train_fm"] = fc.to_json();
    m.counts = {{"steps", report.steps}, {"examples", static_cast<std::int64_t>(data.size())}};
    for (const auto& ex : data) m.items.push_back(ex.id);
    m.extras["final_loss"] = final_loss;
    out.commit(std::move(m));
    return 0;
}

int cmd_train_dpo(const RunConfig& config) {
    const auto dc = dpo_config(config);
    auto in = load_dpo_inputs(config);

    RunLock lock(config.run_dir());
    StageWriter out(config, "train-dpo");
    auto model = in.base.model();
    const auto valset = make_validation_set(std::move(in.val), dc.seed, dc.t_lo, dc.t_hi);
    const auto report = train_dpo(model, dc, in.train, valset, [&](std::int64_t step, const ToyDenoiser&) {
        if (step % dc.eval_every == 0) out.log("step " + std::to_string(step));
    });
    for (const auto& p : report.trajectory) {
        out.log("val step " + std::to_string(p.step) + " margin " + shortest_decimal(p.mean_margin) + " loss " +
                shortest_decimal(p.loss) + " acc " + shortest_decimal(p.accuracy));
    }
    const auto ckpt = Checkpoint::capture(model, SplitMix64(derive_seed(dc.seed, "dpo:noise")),
                                          {{"stage", "train-dpo"}, {"steps", report.steps}, {"beta", dc.beta}});
    out.artifact("checkpoint", "ckpt", ckpt.serialize());
    out.artifact("trajectory", "jsonl", trajectory_jsonl(report.trajectory));
    Json hist = Json::object();
    for (const auto& [t, n] : report.t_histogram) hist[std::to_string(t)] = n;
    out.artifact("t_histogram", "json", hist.dump(2) + "\n");
    std::vector<Json> losses;
    for (std::size_t i = 0; i < report.train_loss.size(); ++i) {
        losses.push_back({{"step", i + 1}, {"loss", report.train_loss[i]}});
    }
    out.artifact("train_loss", "jsonl", to_jsonl(losses));

    StageManifest m;
    m.stage = "train-dpo";
    m.params["train_dpo"] = dc.to_json();
    m.params["base_checkpoint_sha256"] = sha256_hex(in.base.serialize());
    m.counts = {{"steps", report.steps},
                {"steps_per_epoch", report.steps_per_epoch},
                {"train_pairs", static_cast<std::int64_t>(in.train.size())},
                {"val_pairs", static_cast<std::int64_t>(valset.pairs.size())}};
    for (const auto& ex : in.train) m.items.push_back(ex.key);
    if (!report.trajectory.empty()) {
        const auto& last = report.trajectory.back();
        m.extras["final"] = to_json(last);
        if (report.trajectory.size() >= 2) m.extras["spearman"] = trajectory_spearman(report.trajectory);
    }
    out.commit(std::move(m));
    return 0;
}

int cmd_sweep_beta(const RunConfig& config) {
    const auto dc = dpo_config(config);
    const auto sec = config.section("sweep_beta");
    std::vector<double> betas = {30.0, 100.0, 300.0};
    if (sec.contains("betas")) {
        try {
            betas = sec.at("betas").get<std::vector<double>>();
        } catch (const Json::exception&) {
            throw ConfigError("config key 'sweep_beta.betas' must be a list of numbers");
        }
    }
    if (betas.size() < 2) throw ConfigError("config key 'sweep_beta.betas' needs at least two values");
    auto in = load_dpo_inputs(config);

    RunLock lock(config.run_dir());
    StageWriter out(config, "sweep-beta");
    const auto valset = make_validation_set(std::move(in.val), dc.seed, dc.t_lo, dc.t_hi);
    std::map<double, std::vector<TrajectoryPoint>> trajectories;
    std::vector<Json> rows;
    for (const double beta : betas) {
        auto cfg = dc;
        cfg.beta = beta;
        auto model = in.base.model();
        const auto report = train_dpo(model, cfg, in.train, valset);
        out.log("beta " + shortest_decimal(beta) + ": spearman " +
                shortest_decimal(trajectory_spearman(report.trajectory)) + ", final margin " +
                shortest_decimal(report.trajectory.back().mean_margin));
        for (const auto& p : report.trajectory) {
            auto row = to_json(p);
            row["beta"] = beta;
            rows.push_back(std::move(row));
        }
        trajectories[beta] = report.trajectory;
    }
    out.artifact("trajectories", "jsonl", to_jsonl(rows));

    std::vector<BetaScore> scores;
    std::optional<double> selected;
    std::string reason;
    try {
        selected = select_beta(trajectories, &scores);
    } catch (const SelectionError& e) {
        reason = e.what();
    }
    if (scores.empty()) {
        for (const auto& [beta, traj] : trajectories) {
            scores.push_back({beta, trajectory_spearman(traj), traj.back().mean_margin});
        }
    }
    Json score_rows = Json::array();
    for (const auto& s : scores) {
        score_rows.push_back({{"beta", s.beta}, {"spearman", s.spearman}, {"final_margin", s.final_margin}});
    }
    StageManifest m;
    m.stage = "sweep-beta";
    m.params["train_dpo"] = dc.to_json();
    m.params["betas"] = betas;
    m.counts = {{"candidates", static_cast<std::int64_t>(betas.size())},
                {"train_pairs", static_cast<std::int64_t>(in.train.size())}};
    m.extras["scores"] = score_rows;
    m.extras["selected_beta"] = selected ? Json(*selected) : Json(nullptr);
    if (!selected) m.extras["reason"] = reason;
    out.commit(std::move(m));
    if (!selected) {
        std::cerr << "sweep-beta: " << reason << "\n";
        return 1;
    }
    std::cout << "selected beta " << shortest_decimal(*selected) << "\n";
    return 0;
}

}  // namespace physpref::app
