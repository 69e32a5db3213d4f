// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>

#include "physpref/error.hpp"
#include "run_context.hpp"
#include "test_support.hpp"

using namespace physpref;
using physpref::app::ConfigError;
using physpref::app::RunConfig;
namespace fs = std::filesystem;
using physpref::testing::TempDir;

TEST_CASE("overrides set nested keys with JSON or string values") {
    auto c = RunConfig::from_json(Json{{"seed", 1}}, "/tmp");
    c.set("train_dpo.beta=30");
    c.set("train_dpo.optim.lr=1e-4");
    c.set("evaluate.mode=http");
    c.set("seed=9");
    CHECK(c.section("train_dpo").at("beta") == 30);
    CHECK(c.section("train_dpo").at("optim").at("lr") == 1e-4);
    CHECK(c.section("evaluate").at("mode") == "http");
    CHECK(c.seed() == 9);
    CHECK_THROWS_AS(c.set("no-equals"), ConfigError);
    CHECK_THROWS_AS(c.set("a..b=1"), ConfigError);
    CHECK_THROWS_AS(c.set("seed=-3"), ConfigError);
    CHECK_THROWS_AS(c.set("run_id=../escape"), ConfigError);
}

TEST_CASE("relative paths resolve against the config directory") {
    TempDir dir;
    std::ofstream(dir.path() / "r.jsonl") << "\n";
    auto c = RunConfig::from_json(Json{{"paths", {{"ratings", "r.jsonl"}}}, {"output_root", "out"}, {"run_id", "x"}},
                                  dir.path());
    CHECK(c.input_path("ratings") == dir.path() / "r.jsonl");
    CHECK(c.run_dir() == dir.path() / "out" / "x");
}

TEST_CASE("missing paths name their config key") {
    TempDir dir;
    auto c = RunConfig::from_json(Json{{"paths", {{"images", "nowhere"}}}}, dir.path());
    try {
        c.input_path("ratings");
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("paths.ratings") != std::string::npos);
    }
    try {
        c.input_path("images");
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("paths.images") != std::string::npos);
    }
}

TEST_CASE("stage references need a committed stage") {
    TempDir dir;
    auto c = RunConfig::from_json(Json{{"paths", {{"latents", "stage:toygen/latents"}}}}, dir.path());
    CHECK_THROWS_AS(c.input_path("latents"), ConfigError);
    auto bad = RunConfig::from_json(Json{{"paths", {{"latents", "stage:toygen"}}}}, dir.path());
    CHECK_THROWS_AS(bad.input_path("latents"), ConfigError);
}

TEST_CASE("committed stages are audited file by file") {
    TempDir dir;
    auto c = RunConfig::from_json(Json{{"output_root", dir.path().string()}, {"run_id", "r"}}, dir.path());
    {
        app::StageWriter out(c, "demo");
        out.artifact("table", "txt", "hello\n");
        StageManifest m;
        m.counts = {{"rows", 1}};
        out.commit(std::move(m));
    }
    const auto stage = c.run_dir() / "demo";
    CHECK(app::audit_stage(stage).empty());
    const auto file = app::stage_artifact(c, "demo", "table");
    CHECK(fs::is_regular_file(file));
    const auto manifest = app::read_stage_manifest(c, "demo");
    CHECK_FALSE(manifest.params.at("run_config").contains("run_id"));
    std::ofstream(file, std::ios::app) << "tamper";
    CHECK_FALSE(app::audit_stage(stage).empty());
}

TEST_CASE("an uncommitted stage is quarantined") {
    TempDir dir;
    auto c = RunConfig::from_json(Json{{"output_root", dir.path().string()}, {"run_id", "r"}}, dir.path());
    {
        app::StageWriter out(c, "broken");
        out.artifact("half", "txt", "partial");
    }
    CHECK_FALSE(fs::exists(c.run_dir() / "broken"));
    CHECK(fs::exists(c.run_dir() / "failed" / "broken-1"));
}

TEST_CASE("a second writer is locked out") {
    TempDir dir;
    app::RunLock first(dir.path());
    CHECK_THROWS_AS(app::RunLock(dir.path()), IoError);
}
