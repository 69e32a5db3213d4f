// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/judge.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <thread>

#include <httplib.h>

#include "physpref/error.hpp"

namespace physpref {

HttpJudge::HttpJudge(std::string endpoint, std::string version, int timeout_seconds)
    : version_(std::move(version)), timeout_seconds_(timeout_seconds) {
    constexpr std::string_view scheme = "http://";
    if (!endpoint.starts_with(scheme)) {
        throw ValidationError("judge endpoint must start with http://, got '" + endpoint + "'");
    }
    const auto slash = endpoint.find('/', scheme.size());
    host_ = endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : endpoint.substr(slash);
    if (const char* tok = std::getenv(kTokenVariable); tok && *tok) token_ = tok;
}

std::string HttpJudge::query(const JudgeRequest& request) {
    httplib::Client client(host_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (token_) headers.emplace("Authorization", "Bearer " + *token_);
    const auto res = client.Post(path_, headers, request.to_json().dump(), "application/json");
    count_call();
    if (!res) {
        throw IoError("judge endpoint " + host_ + path_ + " unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw ProtocolError("judge endpoint returned HTTP " + std::to_string(res->status));
    }
    return res->body;
}

OracleJudge::OracleJudge(Scorer scorer, std::string version) : scorer_(std::move(scorer)), version_(std::move(version)) {}

std::string OracleJudge::query(const JudgeRequest& request) {
    count_call();
    std::map<std::string, int> scores;
    {
        std::lock_guard lock(mutex_);
        auto it = memo_.find(request.video_id);
        if (it == memo_.end()) it = memo_.emplace(request.video_id, scorer_(request.video_id)).first;
        scores = it->second;
    }
    const auto it = scores.find(request.dimension);
    if (it == scores.end()) {
        throw ProtocolError("oracle has no score for dimension '" + request.dimension + "'");
    }
    return Json{{request.dimension, it->second}}.dump();
}

VerdictCache::VerdictCache(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(path_)) return;
    for (const auto& row : read_jsonl(path_)) {
        const auto v = verdict_from_json(row.value, path_.string(), row.line);
        entries_[v.cache_key] = v;
    }
}

std::optional<JudgeVerdict> VerdictCache::get(const std::string& cache_key) const {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(cache_key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void VerdictCache::put(const JudgeVerdict& verdict) {
    std::lock_guard lock(mutex_);
    entries_[verdict.cache_key] = verdict;
}

std::size_t VerdictCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void VerdictCache::flush() const {
    if (path_.empty()) return;
    std::vector<Json> rows;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [key, v] : entries_) rows.push_back(to_json(v));
    }
    write_file_atomic(path_, to_jsonl(rows));
}

std::vector<JudgeVerdict> run_judge(std::span<const JudgeRequest> requests, Judge& judge, VerdictCache& cache,
                                    int max_parallel, JudgeRunStats* stats) {
    if (max_parallel < 1) throw ValidationError("run_judge: max_parallel must be >= 1");
    JudgeRunStats local;
    local.requests = requests.size();

    std::vector<const JudgeRequest*> pending;
    std::map<std::string, bool> queued;
    for (const auto& r : requests) {
        if (cache.get(r.cache_key)) {
            ++local.cache_hits;
        } else if (!queued[r.cache_key]) {
            queued[r.cache_key] = true;
            pending.push_back(&r);
        }
    }

    std::vector<std::optional<JudgeVerdict>> fresh(pending.size());
    std::vector<std::exception_ptr> errors(pending.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < pending.size(); i = next++) {
            try {
                const auto& r = *pending[i];
                const std::string raw = judge.query(r);
                fresh[i] = parse_verdict(raw, r.dimension, r.video_id, r.cache_key);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(max_parallel), pending.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    for (std::size_t i = 0; i < pending.size(); ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        cache.put(*fresh[i]);
    }
    local.calls = pending.size();

    std::vector<JudgeVerdict> out;
    out.reserve(requests.size());
    for (const auto& r : requests) {
        auto v = *cache.get(r.cache_key);
        v.video_id = r.video_id;
        out.push_back(std::move(v));
    }
    if (stats) *stats = local;
    return out;
}

}  // namespace physpref
