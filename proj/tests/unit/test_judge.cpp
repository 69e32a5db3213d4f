// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <thread>

#include "physpref/error.hpp"
#include "physpref/io.hpp"
#include "physpref/judge.hpp"
#include "test_support.hpp"

// After Eigen: resolv.h, pulled in here, defines _res as a macro.
#include <httplib.h>

using namespace physpref;
using physpref::testing::TempDir;

namespace {

std::vector<JudgeRequest> requests_for(const std::vector<std::string>& videos, const std::string& version = "j/1") {
    std::vector<JudgeRequest> out;
    const std::vector<std::string> laws = {"chain"};
    for (const auto& v : videos) {
        const VideoRef ref{v, std::string(64, static_cast<char>('a' + v.size() % 6)) + v, 49, 16.0};
        for (auto& r : build_judge_queries(ref, "dominoes topple in a chain", laws, version)) out.push_back(r);
    }
    return out;
}

OracleJudge constant_judge(int score) {
    return OracleJudge([score](const std::string&) {
        return std::map<std::string, int>{{"sa", score}, {"ptv", score}, {"persistence", score}, {"chain", score}};
    });
}

// Local judge endpoint answering every dimension with 3.
class FakeServer {
public:
    explicit FakeServer(int status = 200, std::string forced_body = {}) {
        server_.Post("/v1/judge", [this, status, forced_body](const httplib::Request& req, httplib::Response& res) {
            {
                std::lock_guard lock(mutex_);
                ++hits_;
                last_auth_ = req.get_header_value("Authorization");
                last_body_ = req.body;
            }
            res.status = status;
            if (!forced_body.empty()) {
                res.set_content(forced_body, "application/json");
                return;
            }
            const auto j = Json::parse(req.body);
            res.set_content(Json{{j.at("dimension").get<std::string>(), 3}}.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/judge"; }
    int hits() {
        std::lock_guard lock(mutex_);
        return hits_;
    }
    std::string last_auth() {
        std::lock_guard lock(mutex_);
        return last_auth_;
    }
    std::string last_body() {
        std::lock_guard lock(mutex_);
        return last_body_;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::mutex mutex_;
    int hits_ = 0;
    std::string last_auth_;
    std::string last_body_;
};

}  // namespace

TEST_CASE("repeated evaluation is served from the cache") {
    auto judge = constant_judge(4);
    VerdictCache cache;
    const auto reqs = requests_for({"a", "bb", "ccc"});
    JudgeRunStats first, second;
    const auto v1 = run_judge(reqs, judge, cache, 4, &first);
    CHECK(first.calls == 12);
    CHECK(judge.calls() == 12);
    const auto v2 = run_judge(reqs, judge, cache, 4, &second);
    CHECK(second.calls == 0);
    CHECK(second.cache_hits == 12);
    CHECK(judge.calls() == 12);
    REQUIRE(v1.size() == v2.size());
    for (std::size_t i = 0; i < v1.size(); ++i) CHECK(v1[i].score == v2[i].score);
}

TEST_CASE("duplicate keys in one batch are asked once") {
    auto judge = constant_judge(2);
    VerdictCache cache;
    auto reqs = requests_for({"a"});
    const auto doubled = [&] {
        auto all = reqs;
        all.insert(all.end(), reqs.begin(), reqs.end());
        return all;
    }();
    const auto out = run_judge(doubled, judge, cache, 3);
    CHECK(out.size() == 8);
    CHECK(judge.calls() == 4);
}

TEST_CASE("results follow request order") {
    auto judge = OracleJudge([](const std::string& v) {
        const int s = v == "a" ? 1 : 5;
        return std::map<std::string, int>{{"sa", s}, {"ptv", s}, {"persistence", s}, {"chain", s}};
    });
    VerdictCache cache;
    const auto reqs = requests_for({"a", "bb", "a"});
    const auto out = run_judge(reqs, judge, cache, 4);
    for (std::size_t i = 0; i < reqs.size(); ++i) {
        CHECK(out[i].video_id == reqs[i].video_id);
        CHECK(out[i].dimension == reqs[i].dimension);
        CHECK(out[i].score == (reqs[i].video_id == "a" ? 1 : 5));
    }
}

TEST_CASE("the cache file round-trips and depends only on its contents") {
    TempDir dir;
    const auto reqs = requests_for({"a", "bb"});
    {
        auto judge = constant_judge(3);
        VerdictCache cache(dir.path() / "one.jsonl");
        run_judge(reqs, judge, cache, 1);
        cache.flush();
    }
    {
        auto judge = constant_judge(3);
        VerdictCache cache(dir.path() / "two.jsonl");
        std::vector<JudgeRequest> reversed(reqs.rbegin(), reqs.rend());
        run_judge(reversed, judge, cache, 4);
        cache.flush();
    }
    CHECK(read_text_file(dir.path() / "one.jsonl") == read_text_file(dir.path() / "two.jsonl"));
    auto judge = constant_judge(1);
    VerdictCache reloaded(dir.path() / "one.jsonl");
    CHECK(reloaded.size() == 8);
    run_judge(reqs, judge, reloaded, 2);
    CHECK(judge.calls() == 0);
}

TEST_CASE("a bad oracle answer surfaces as a protocol error") {
    OracleJudge judge([](const std::string&) { return std::map<std::string, int>{{"sa", 9}}; });
    VerdictCache cache;
    const auto reqs = requests_for({"a"});
    CHECK_THROWS_AS(run_judge(reqs, judge, cache, 2), ProtocolError);
    CHECK(cache.size() == 0);
}

TEST_CASE("HTTP judge posts one request per dimension") {
    FakeServer server;
    ::setenv(HttpJudge::kTokenVariable, "s3cret", 1);
    HttpJudge judge(server.endpoint(), "http-judge/1", 5);
    ::unsetenv(HttpJudge::kTokenVariable);
    VerdictCache cache;
    const auto reqs = requests_for({"a", "bb"}, judge.version());
    const auto out = run_judge(reqs, judge, cache, 2);
    CHECK(server.hits() == 8);
    for (const auto& v : out) CHECK(v.score == 3);
    CHECK(server.last_auth() == "Bearer s3cret");
    const auto body = Json::parse(server.last_body());
    CHECK(body.at("judge_version") == "http-judge/1");
    run_judge(reqs, judge, cache, 2);
    CHECK(server.hits() == 8);
}

TEST_CASE("HTTP errors and malformed replies are protocol errors") {
    const auto reqs = requests_for({"a"});
    SUBCASE("status 500") {
        FakeServer server(500);
        HttpJudge judge(server.endpoint(), "j", 5);
        CHECK_THROWS_AS(judge.query(reqs[0]), ProtocolError);
    }
    SUBCASE("two keys") {
        FakeServer server(200, R"({"sa": 3, "ptv": 4})");
        HttpJudge judge(server.endpoint(), "j", 5);
        VerdictCache cache;
        CHECK_THROWS_AS(run_judge(reqs, judge, cache, 1), ProtocolError);
    }
}

TEST_CASE("endpoints must be plain http URLs") {
    CHECK_THROWS_AS(HttpJudge("ftp://host/judge", "j"), ValidationError);
    CHECK_THROWS_AS(HttpJudge("https://host/judge", "j"), ValidationError);
}

TEST_CASE("an unreachable endpoint is an I/O error") {
    HttpJudge judge("http://127.0.0.1:1/judge", "j", 1);
    CHECK_THROWS_AS(judge.query(requests_for({"a"})[0]), IoError);
}
