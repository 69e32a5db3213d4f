// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "physpref/error.hpp"
#include "physpref/io.hpp"
#include "physpref/manifest.hpp"

namespace physpref::app {

namespace fs = std::filesystem;

/// Bad or missing configuration; the message names the offending key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// The effective configuration: file contents with flag overrides applied.
class RunConfig {
public:
    static RunConfig load(const fs::path& path);
    static RunConfig from_json(Json doc, fs::path base_dir);

    /// Applies "dotted.key=value"; the value is parsed as JSON when possible
    /// and taken as a string otherwise.
    void set(std::string_view assignment);

    const Json& doc() const noexcept { return doc_; }
    const std::string& run_id() const;
    std::uint64_t seed() const;
    fs::path run_dir() const;

    /// Section object, or an empty object when absent.
    Json section(std::string_view name) const;

    /// Resolves paths.<key>. "stage:<stage>/<artifact>" points at an artifact
    /// recorded in that stage's manifest; other values are relative to the
    /// config file. Throws ConfigError naming the key when it is missing or
    /// the target does not exist.
    fs::path input_path(std::string_view key) const;

private:
    Json doc_;
    fs::path base_dir_;
};

/// Exclusive writer lock on a run directory, released on destruction.
class RunLock {
public:
    explicit RunLock(const fs::path& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    fs::path path_;
};

/// Collects one stage's outputs in a staging directory. commit() replaces
/// runs/<id>/<stage>/ with it; if the writer is destroyed uncommitted, the
/// partial outputs move to runs/<id>/failed/<stage>-N/.
class StageWriter {
public:
    StageWriter(const RunConfig& config, std::string stage);
    ~StageWriter();
    StageWriter(const StageWriter&) = delete;
    StageWriter& operator=(const StageWriter&) = delete;

    const std::string& stage() const noexcept { return stage_; }
    const fs::path& dir() const noexcept { return staging_; }

    /// Writes `<name>.<sha256[:16]>.<ext>` and records it under `name`.
    fs::path artifact(const std::string& name, const std::string& ext, std::string_view content);

    /// Records a subdirectory (created on demand) whose files are audited
    /// individually.
    fs::path directory_artifact(const std::string& name);

    void log(std::string_view line);

    /// Adds the artifact table and the run config, seals and writes the
    /// manifest, then publishes the stage.
    void commit(StageManifest manifest);

    const fs::path& quarantine() const noexcept { return quarantined_; }

private:
    const RunConfig& config_;
    std::string stage_;
    fs::path staging_;
    fs::path final_;
    Json artifacts_ = Json::object();
    std::ofstream log_;
    bool committed_ = false;
    fs::path quarantined_;
};

/// Manifest of a published stage of this run.
StageManifest read_stage_manifest(const RunConfig& config, std::string_view stage);

/// Path of an artifact recorded in a published stage's manifest.
fs::path stage_artifact(const RunConfig& config, std::string_view stage, std::string_view name);

/// Checks every recorded artifact of a stage against its digest. Returns
/// one message per problem.
std::vector<std::string> audit_stage(const fs::path& stage_dir);

}  // namespace physpref::app
