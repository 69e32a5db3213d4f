// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <set>

#include "physpref/error.hpp"
#include "physpref/hashing.hpp"
#include "physpref/pipeline.hpp"
#include "test_support.hpp"

using namespace physpref;
using physpref::testing::class_pool;
using physpref::testing::TempDir;

namespace {

VideoEntry video(const std::string& id, double s, int raters = 3, const std::string& group = "p1:chain") {
    VideoEntry v;
    v.video_id = id;
    v.prompt_id = group.substr(0, group.find(':'));
    v.group_id = group;
    v.generator_id = "g";
    v.s_score = s;
    v.rater_count = raters;
    return v;
}

PreferencePair pair_in(const std::string& prompt, int i, EventClass c = EventClass::A) {
    PreferencePair p;
    p.prompt_id = prompt;
    p.group_id = prompt + ":chain";
    p.winner = prompt + "-w" + std::to_string(i);
    p.loser = prompt + "-l" + std::to_string(i);
    p.margin = 2.0;
    p.event_class = c;
    return p;
}

StageManifest sealed(const std::string& stage, std::map<std::string, std::int64_t> counts,
                     std::vector<std::string> items, Json params = Json::object()) {
    StageManifest m;
    m.stage = stage;
    m.counts = std::move(counts);
    m.items = std::move(items);
    m.params = std::move(params);
    m.seal();
    return m;
}

std::vector<std::string> keys_for(const std::string& prefix, int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
        const auto prompt = prefix + std::to_string(i % 10);
        out.push_back(prompt + "|" + prompt + ":chain|w" + std::to_string(i) + "|l" + std::to_string(i));
    }
    return out;
}

}  // namespace

TEST_CASE("T1 on a three-video group yields the three ordered pairs") {
    const std::vector<VideoEntry> vs = {video("a", 12.0), video("b", 11.0), video("c", 9.5)};
    T1Stats stats;
    const auto pairs = t1_enumerate_pairs(vs, 1.0, 2, &stats);
    REQUIRE(pairs.size() == 3);
    std::map<std::pair<std::string, std::string>, double> got;
    for (const auto& p : pairs) got[{p.winner, p.loser}] = p.margin;
    CHECK(got.at({"a", "c"}) == doctest::Approx(2.5));
    CHECK(got.at({"a", "b"}) == doctest::Approx(1.0));
    CHECK(got.at({"b", "c"}) == doctest::Approx(1.5));
    CHECK(stats.retained == 3);
}

TEST_CASE("T1 drops ties and sub-threshold margins") {
    const std::vector<VideoEntry> tie = {video("a", 10.0), video("b", 10.0)};
    CHECK(t1_enumerate_pairs(tie).empty());
    const std::vector<VideoEntry> close = {video("a", 10.9), video("b", 10.0)};
    CHECK(t1_enumerate_pairs(close).empty());
}

TEST_CASE("T1 requires two raters on both sides") {
    const std::vector<VideoEntry> vs = {video("a", 14.0, 1), video("b", 5.0, 3), video("c", 3.0, 2)};
    const auto pairs = t1_enumerate_pairs(vs);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].winner == "b");
    CHECK(pairs[0].loser == "c");
}

TEST_CASE("T1 refuses a group spanning two prompts") {
    auto b = video("b", 5.0);
    b.prompt_id = "p2";
    const std::vector<VideoEntry> vs = {video("a", 12.0), b};
    CHECK_THROWS_AS(t1_enumerate_pairs(vs), IntegrityError);
}

TEST_CASE("T1 on the shipped fixture matches exhaustive search") {
    const auto records = ingest_ratings(physpref::testing::fixture("ratings_small.jsonl"));
    const auto t0 = run_t0(records);
    const auto kept = keep_raters(records, t0.qc.retained_raters);
    const auto pairs = t1_enumerate_pairs(t0.videos);
    std::vector<physpref::testing::PairTriple> got;
    for (const auto& p : pairs) got.emplace_back(p.group_id, p.winner, p.loser);
    std::sort(got.begin(), got.end());
    CHECK(got == physpref::testing::brute_force_t1(kept));
    CHECK_FALSE(got.empty());
}

TEST_CASE("split counts floor each fraction and give the remainder to train") {
    CHECK(split_counts(10, {0.7, 0.15, 0.15}) == std::array<std::size_t, 3>{8, 1, 1});
    CHECK(split_counts(100, {0.7, 0.15, 0.15}) == std::array<std::size_t, 3>{70, 15, 15});
    CHECK(split_counts(4, {0.8, 0.1, 0.1}) == std::array<std::size_t, 3>{2, 1, 1});
}

TEST_CASE("prompt split is disjoint, complete and seed-stable") {
    std::vector<PreferencePair> pairs;
    for (int p = 0; p < 30; ++p) {
        for (int i = 0; i < 3; ++i) pairs.push_back(pair_in("p" + std::to_string(p), i));
    }
    const SplitFractions f{0.7, 0.15, 0.15};
    const auto a = t1_split_prompts(pairs, f, 11);
    const auto b = t1_split_prompts(pairs, f, 11);
    CHECK(a.train_prompts == b.train_prompts);
    CHECK(a.heldout_prompts == b.heldout_prompts);
    std::set<std::string> seen;
    for (const auto* part : {&a.train_prompts, &a.val_prompts, &a.heldout_prompts}) {
        for (const auto& p : *part) CHECK(seen.insert(p).second);
    }
    CHECK(seen.size() == 30);
    CHECK(a.train.size() + a.val.size() + a.heldout.size() == pairs.size());
    const T1Stats stats{0, 0, 0, static_cast<std::int64_t>(pairs.size())};
    CHECK(make_t1_manifest(pairs, a, stats, {}).serialize() == make_t1_manifest(pairs, b, stats, {}).serialize());
    const auto c = t1_split_prompts(pairs, f, 12);
    CHECK(c.heldout_prompts != a.heldout_prompts);
}

TEST_CASE("empty image digest and missing-image drops") {
    TempDir dir;
    std::ofstream(dir.path() / "v-empty.png").close();
    CHECK(sha256_file(dir.path() / "v-empty.png") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    std::ofstream(dir.path() / "v-a.png") << "same bytes";
    std::ofstream(dir.path() / "v-b.ppm") << "same bytes";
    auto ok = pair_in("p1", 0);
    ok.winner = "v-a";
    ok.loser = "v-b";
    auto broken = pair_in("p1", 1);
    broken.winner = "v-a";
    broken.loser = "v-missing";
    const std::vector<PreferencePair> pairs = {ok, broken};
    const auto r = t2_resolve_conditioning(pairs, dir.path());
    REQUIRE(r.survivors.size() == 1);
    CHECK(r.survivors[0].winner_frame_sha256 == r.survivors[0].loser_frame_sha256);
    REQUIRE(r.dropped.size() == 1);
    CHECK(r.dropped[0].key == broken.key());
    CHECK(r.dropped[0].missing_videos == std::vector<std::string>{"v-missing"});
}

TEST_CASE("two candidate images for one video are an integrity error") {
    TempDir dir;
    std::ofstream(dir.path() / "v.png") << "x";
    std::ofstream(dir.path() / "v.jpg") << "y";
    CHECK_THROWS_AS(resolve_first_frame(dir.path(), "v"), IntegrityError);
    CHECK_FALSE(resolve_first_frame(dir.path(), "nothing").has_value());
}

TEST_CASE("reference quotas sample exactly") {
    const auto quotas = reference_quotas();
    std::size_t total = 0;
    for (const auto& [c, n] : quotas) total += n;
    CHECK(total == 1000);
    QuotaMap sizes = quotas;
    for (auto& [c, n] : sizes) n += 7;
    const auto pool = class_pool(sizes);
    const auto r = t3_quota_sample(pool, quotas, 3);
    CHECK(r.subset.size() == 1000);
    std::map<EventClass, std::size_t> got;
    for (const auto& p : r.subset) ++got[p.event_class];
    for (const auto& [c, n] : quotas) CHECK(got[c] == n);
    CHECK(t3_quota_sample(pool, quotas, 3).manifest.manifest_sha256 == r.manifest.manifest_sha256);
}

TEST_CASE("zero quotas give an empty, valid manifest") {
    QuotaMap zero;
    for (const auto c : kAllEventClasses) zero[c] = 0;
    const auto pool = class_pool({{EventClass::A, 4}});
    const auto r = t3_quota_sample(pool, zero, 1);
    CHECK(r.subset.empty());
    CHECK(r.manifest.verify());
}

TEST_CASE("a short class is named in the error") {
    auto sizes = reference_quotas();
    sizes[EventClass::E] = 12;
    const auto pool = class_pool(sizes);
    try {
        t3_quota_sample(pool, reference_quotas(), 1);
        FAIL("expected a selection error");
    } catch (const SelectionError& e) {
        CHECK(std::string(e.what()).find("E") != std::string::npos);
    }
}

TEST_CASE("largest-remainder rescaling keeps the total") {
    const auto scaled = scale_quotas(reference_quotas(), 200);
    std::size_t total = 0;
    for (const auto& [c, n] : scaled) total += n;
    CHECK(total == 200);
    CHECK(scaled.at(EventClass::A) == 103);  // 102.6 rounds up on its remainder
}

TEST_CASE("funnel 50 > 40 > 30 > 20 passes") {
    const Json split = {{"heldout", {"h0"}}};
    const auto t1 = sealed("T1", {{"retained", 50}}, keys_for("p", 50), {{"split", split}});
    const auto t2 = sealed("T2", {{"candidates", 40}, {"survivors", 30}}, keys_for("p", 30));
    const auto t3 = sealed("T3", {{"selected", 20}}, keys_for("p", 20));
    const auto report = verify_funnel(t1, t2, t3);
    CHECK(report.rows.front().pairs == 50);
    CHECK(report.rows.back().pairs == 20);
    CHECK(report.table().find("Trainset") != std::string::npos);
}

TEST_CASE("funnel catches leakage, growth and tampering") {
    const Json split = {{"heldout", {"p3"}}};
    auto t1 = sealed("T1", {{"retained", 50}}, keys_for("p", 50), {{"split", split}});
    auto ok_t2 = sealed("T2", {{"candidates", 40}, {"survivors", 3}}, keys_for("p", 3));
    SUBCASE("heldout prompt in T3") {
        auto t2 = sealed("T2", {{"candidates", 40}, {"survivors", 2}}, keys_for("p", 2));
        auto t3 = sealed("T3", {{"selected", 1}}, {"p3|p3:chain|w|l"});
        CHECK_THROWS_AS(verify_funnel(t1, t2, t3), IntegrityError);
    }
    SUBCASE("T2 larger than T1") {
        auto t2 = sealed("T2", {{"candidates", 60}, {"survivors", 2}}, keys_for("p", 2));
        auto t3 = sealed("T3", {{"selected", 1}}, keys_for("p", 1));
        CHECK_THROWS_AS(verify_funnel(t1, t2, t3), IntegrityError);
    }
    SUBCASE("edited manifest") {
        auto t3 = sealed("T3", {{"selected", 1}}, keys_for("p", 1));
        t3.counts["selected"] = 0;
        CHECK_THROWS_AS(verify_funnel(t1, ok_t2, t3), IntegrityError);
    }
}

TEST_CASE("event classes of the worked prompts") {
    CHECK(classify_event("a ball bounces off a wall") == EventClass::A);
    CHECK(classify_event("") == EventClass::Unclassified);
    CHECK(classify_event("syrup pours into a mug") == EventClass::C);
    CHECK(classify_event("The quiet afternoon") == EventClass::Unclassified);
}

TEST_CASE("keyword ties go to the earlier class") {
    // One hit each for A (bounc) and C (water).
    CHECK(classify_event("water bounces") == EventClass::A);
}

TEST_CASE("the shipped rule file is the builtin table") {
    const auto shipped = EventRuleTable::load(physpref::testing::source_dir() / "data" / "event_rules.json");
    CHECK(shipped.to_json() == EventRuleTable::builtin().to_json());
    CHECK_FALSE(shipped.version.empty());
}

TEST_CASE("labelled pairs take the class of their prompt text") {
    std::vector<PreferencePair> pairs = {pair_in("p1", 0, EventClass::Unclassified)};
    label_event_classes(pairs, {{"p1", "a glass shatters on the floor"}});
    CHECK(pairs[0].event_class == EventClass::B);
}
