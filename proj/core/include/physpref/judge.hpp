// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "physpref/bench.hpp"

namespace physpref {

/// Anything that answers a JudgeRequest with raw response text.
class Judge {
public:
    virtual ~Judge() = default;
    virtual std::string query(const JudgeRequest& request) = 0;
    virtual std::string version() const = 0;

    /// Number of query() calls answered so far.
    std::size_t calls() const noexcept { return calls_.load(); }

protected:
    void count_call() noexcept { ++calls_; }

private:
    std::atomic<std::size_t> calls_{0};
};

/// POSTs the request JSON to an HTTP endpoint ("http://host:port/path").
/// A bearer token is read from PHYSPREF_JUDGE_TOKEN when set.
class HttpJudge final : public Judge {
public:
    HttpJudge(std::string endpoint, std::string version, int timeout_seconds = 60);

    std::string query(const JudgeRequest& request) override;
    std::string version() const override { return version_; }

    static constexpr const char* kTokenVariable = "PHYSPREF_JUDGE_TOKEN";

private:
    std::string host_;
    std::string path_;
    std::string version_;
    std::optional<std::string> token_;
    int timeout_seconds_;
};

/// Offline judge backed by a scoring function (video_id -> dimension -> score).
class OracleJudge final : public Judge {
public:
    using Scorer = std::function<std::map<std::string, int>(const std::string& video_id)>;

    OracleJudge(Scorer scorer, std::string version = "toy-oracle/1");

    std::string query(const JudgeRequest& request) override;
    std::string version() const override { return version_; }

private:
    Scorer scorer_;
    std::string version_;
    std::mutex mutex_;
    std::map<std::string, std::map<std::string, int>> memo_;
};

/// Verdicts keyed by cache_key. Reads and writes line-delimited JSON sorted
/// by cache_key, so the file content only depends on the set of verdicts.
class VerdictCache {
public:
    VerdictCache() = default;
    explicit VerdictCache(std::filesystem::path path);

    std::optional<JudgeVerdict> get(const std::string& cache_key) const;
    void put(const JudgeVerdict& verdict);
    std::size_t size() const;

    /// Writes the cache file atomically (no-op without a path).
    void flush() const;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::map<std::string, JudgeVerdict> entries_;
};

struct JudgeRunStats {
    std::size_t requests = 0;
    std::size_t cache_hits = 0;
    std::size_t calls = 0;
};

/// Answers each request from the cache or the judge, with at most
/// `max_parallel` outstanding judge calls. Identical cache keys are queried
/// once. Results follow request order.
std::vector<JudgeVerdict> run_judge(std::span<const JudgeRequest> requests, Judge& judge, VerdictCache& cache,
                                    int max_parallel = 4, JudgeRunStats* stats = nullptr);

}  // namespace physpref
