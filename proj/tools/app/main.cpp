// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

}  // namespace

int main(int argc, char** argv) {
    using namespace physpref::app;

    CLI::App app{"physpref: physics preference data curation, training and evaluation"};
    app.require_subcommand(1);
    std::string config_path;
    std::vector<std::string> overrides;
    std::string run_id;
    std::string root;
    std::optional<std::uint64_t> seed;
    app.add_option("-c,--config", config_path, "run configuration (JSON)")->required();
    app.add_option("--set", overrides, "override a config value, e.g. --set train_dpo.beta=100")
        ->take_all()
        ->allow_extra_args(false);
    app.add_option("--run-id", run_id, "run identifier (default from config)");
    app.add_option("--root", root, "output root directory (default from config)");
    app.add_option("--seed", seed, "root seed (default from config)");

    auto* toygen = app.add_subcommand("toygen", "generate the toy preference corpus");
    auto* curate = app.add_subcommand("curate", "band-filter clips by a continuous score");
    std::vector<std::string> stages = {"t0", "t1", "t2", "t3"};
    auto* pipeline = app.add_subcommand("pipeline", "run the T0-T3 curation funnel");
    pipeline->add_option("--stages", stages, "subset of t0,t1,t2,t3 to run")->delimiter(',');
    auto* train_fm = app.add_subcommand("train-fm", "train the base flow-matching model");
    auto* train_dpo = app.add_subcommand("train-dpo", "fine-tune the base model with flow-matching DPO");
    auto* sweep = app.add_subcommand("sweep-beta", "compare beta candidates on the validation split");
    auto* evaluate = app.add_subcommand("evaluate", "score generators on held-out prompts");
    bool oracle = false;
    std::string endpoint;
    evaluate->add_flag("--oracle", oracle, "use the built-in toy oracle judge");
    evaluate->add_option("--endpoint", endpoint, "HTTP judge endpoint");
    auto* verify = app.add_subcommand("verify", "audit manifests and artifacts of a run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        auto config = RunConfig::load(config_path);
        for (const auto& o : overrides) config.set(o);
        if (!run_id.empty()) config.set("run_id=\"" + run_id + "\"");
        if (!root.empty()) config.set("output_root=" + nlohmann::json(root).dump());
        if (seed) config.set("seed=" + std::to_string(*seed));
        if (oracle && !endpoint.empty()) throw ConfigError("--oracle and --endpoint are mutually exclusive");
        if (oracle) config.set("evaluate.mode=\"oracle\"");
        if (!endpoint.empty()) {
            config.set("evaluate.mode=\"http\"");
            config.set("evaluate.endpoint=" + nlohmann::json(endpoint).dump());
        }

        if (toygen->parsed()) return cmd_toygen(config);
        if (curate->parsed()) return cmd_curate(config);
        if (pipeline->parsed()) return cmd_pipeline(config, stages);
        if (train_fm->parsed()) return cmd_train_fm(config);
        if (train_dpo->parsed()) return cmd_train_dpo(config);
        if (sweep->parsed()) return cmd_sweep_beta(config);
        if (evaluate->parsed()) return cmd_evaluate(config);
        if (verify->parsed()) return cmd_verify(config);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
