// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>

#include "physpref/conditioning.hpp"
#include "physpref/oracle.hpp"
#include "physpref/pipeline.hpp"
#include "physpref/toyworld.hpp"

using namespace physpref;

namespace {

constexpr int kT = 49, kH = 64, kW = 64;

bool frames_equal(const Tensor4& a, const Tensor4& b, int t) {
    for (int c = 0; c < a.shape().c; ++c) {
        for (int y = 0; y < a.shape().h; ++y) {
            for (int x = 0; x < a.shape().w; ++x) {
                if (a(c, t, y, x) != b(c, t, y, x)) return false;
            }
        }
    }
    return true;
}

QuotaMap hundred() { return scale_quotas(reference_quotas(), 100); }

}  // namespace

TEST_CASE("a ball at rest renders identical frames") {
    ToyParams p;
    const auto clip = gen_clip(p, 21, kH, kW, 1);
    for (int t = 1; t < 21; ++t) {
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < kH; ++y) {
                for (int x = 0; x < kW; ++x) REQUIRE(clip.frames(c, t, y, x) == clip.frames(c, 0, y, x));
            }
        }
    }
    CHECK(clip.bounces.empty());
}

TEST_CASE("free flight follows the closed-form parabola") {
    ToyParams p;
    p.y0 = 20.0;
    p.vx = 0.7;
    p.vy = 0.5;
    p.gravity = 0.1;
    const auto clip = gen_clip(p, 21, kH, kW, 2);
    REQUIRE(clip.bounces.empty());
    for (int k = 0; k < 21; ++k) {
        CHECK(clip.centers[k][1] == doctest::Approx(20.0 + 0.5 * k + 0.05 * k * k).epsilon(1e-12));
        CHECK(clip.centers[k][0] == doctest::Approx(32.0 + 0.7 * k).epsilon(1e-12));
    }
}

TEST_CASE("an elastic bounce keeps the speed") {
    ToyParams p;
    p.vx = 3.0;
    const auto clip = gen_clip(p, kT, kH, kW, 3);
    REQUIRE_FALSE(clip.bounces.empty());
    for (const auto& b : clip.bounces) CHECK(b.normal_speed == doctest::Approx(3.0));
    for (int k = 1; k < kT; ++k) {
        const double dx = std::abs(clip.centers[k][0] - clip.centers[k - 1][0]);
        CHECK(dx <= 3.0 + 1e-9);
    }
    // Between bounces the ball covers exactly 3 px per frame.
    const double first_hit = clip.bounces.front().time;
    for (int k = 1; k < static_cast<int>(first_hit); ++k) {
        CHECK(clip.centers[k][0] - clip.centers[k - 1][0] == doctest::Approx(3.0));
    }
}

TEST_CASE("inelastic floor bounces lose speed") {
    ToyParams p;
    p.y0 = 10.0;
    p.gravity = 0.4;
    p.restitution = 0.8;
    const auto clip = gen_clip(p, kT, kH, kW, 4);
    std::vector<double> floor_speeds;
    for (const auto& b : clip.bounces) {
        if (b.wall == 3) floor_speeds.push_back(b.normal_speed);
    }
    REQUIRE(floor_speeds.size() >= 2);
    for (std::size_t i = 1; i < floor_speeds.size(); ++i) {
        CHECK(floor_speeds[i] == doctest::Approx(0.8 * floor_speeds[i - 1]).epsilon(1e-6));
    }
}

TEST_CASE("pixels stay in the unit range and the disk is anti-aliased") {
    const auto clip = gen_clip(sample_params(5), kT, kH, kW, 5);
    std::set<double> levels;
    for (double v : clip.frames.values()) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
        levels.insert(v);
    }
    CHECK(levels.size() > 10);
}

TEST_CASE("corruptions leave the conditioning prefix untouched") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto clean = gen_clip(sample_params(seed), kT, kH, kW, seed);
        for (const auto mode : kAllCorruptions) {
            CAPTURE(to_string(mode));
            const auto bad = corrupt(clean, mode, seed + 100);
            CHECK(bad.onset >= kConditioningFrames);
            CHECK(bad.corruption == mode);
            for (int t = 0; t < kConditioningFrames; ++t) CHECK(frames_equal(clean.frames, bad.frames, t));
            bool differs = false;
            for (int t = kConditioningFrames; t < kT && !differs; ++t) differs = !frames_equal(clean.frames, bad.frames, t);
            CHECK(differs);
        }
    }
}

TEST_CASE("wall pass crosses a wall without reflection") {
    int crossed = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto clean = gen_clip(sample_params(seed), kT, kH, kW, seed);
        const auto bad = corrupt(clean, Corruption::WallPass, seed);
        bool outside = false;
        for (const auto& c : bad.centers) outside = outside || c[0] < 0 || c[0] > kW || c[1] < 0 || c[1] > kH;
        crossed += outside ? 1 : 0;
    }
    CHECK(crossed == 20);
}

TEST_CASE("color drift shifts hue linearly and trips the color check") {
    const auto clean = gen_clip(sample_params(9), kT, kH, kW, 9);
    const auto bad = corrupt(clean, Corruption::ColorDrift, 9);
    CHECK(oracle_residuals(bad.frames).color > oracle_residuals(clean.frames).color);
    CHECK(oracle_scores(bad.frames).at("shadow_reflection") <= 2);
}

TEST_CASE("pixel oracle over 100 seeds") {
    int clean_low = 0, wall_missed = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto clean = gen_clip(sample_params(seed), kT, kH, kW, seed);
        const auto scores = oracle_scores(clean.frames);
        for (const auto& [dim, s] : scores) clean_low += s < 4 ? 1 : 0;
        CHECK(oracle_scores(clean.frames) == scores);
        const auto bad = corrupt(clean, Corruption::WallPass, seed + 7);
        wall_missed += oracle_scores(bad.frames).at("collision_rebound") > 2 ? 1 : 0;
    }
    CHECK(clean_low == 0);
    CHECK(wall_missed == 0);
}

TEST_CASE("latent oracle scores clean latents 5 and lowers corrupted totals") {
    int clean_low = 0;
    std::map<Corruption, int> detected;
    const int n = 100;
    for (std::uint64_t seed = 0; seed < n; ++seed) {
        const auto clean = gen_clip(sample_params(seed), kT, kH, kW, seed);
        const auto clean_scores = latent_oracle_scores(ToyCodec::encode(clean.frames));
        for (const auto& [dim, s] : clean_scores) clean_low += s < 5 ? 1 : 0;
        for (const auto mode : kAllCorruptions) {
            const auto bad = corrupt(clean, mode, seed + 31);
            if (oracle_total(latent_oracle_scores(ToyCodec::encode(bad.frames))) < oracle_total(clean_scores)) {
                ++detected[mode];
            }
        }
    }
    CHECK(clean_low == 0);
    // Calibration floors from a 1000-seed sweep: wall pass, speed jump and
    // color drift are always caught; gravity flip and teleport mostly.
    CHECK(detected[Corruption::WallPass] >= 95);
    CHECK(detected[Corruption::SpeedJump] >= 95);
    CHECK(detected[Corruption::ColorDrift] >= 95);
    CHECK(detected[Corruption::GravityFlip] >= 85);
    CHECK(detected[Corruption::Teleport] >= 70);
}

TEST_CASE("degenerate latents score as violations") {
    const Tensor4 flat({16, 13, 8, 8}, Semantics::Clean, 0.5);
    const auto r = latent_oracle_residuals(flat);
    CHECK(r.presence == 1.0);
    CHECK(latent_oracle_scores(r).at("sa") == 1);
    CHECK_THROWS(latent_oracle_residuals(Tensor4({16, 3, 8, 8})));
}

TEST_CASE("toy prompts classify back to their class") {
    for (const auto c : kAllEventClasses) {
        for (const auto color : kToyColors) CHECK(classify_event(toy_prompt(c, color)) == c);
    }
    CHECK(toy_law(EventClass::C) == "fluids");
}

TEST_CASE("toy dataset follows the class mix within one pair") {
    const auto mix = hundred();
    const auto ds = make_pref_dataset(100, mix, 5);
    CHECK(ds.pairs.size() == 100);
    std::map<EventClass, std::size_t> hist;
    for (const auto& p : ds.pairs) ++hist[p.event_class];
    for (const auto& [c, n] : mix) {
        CAPTURE(to_string(c));
        CHECK(std::abs(static_cast<long>(hist[c]) - static_cast<long>(n)) <= 1);
    }
}

TEST_CASE("toy dataset is byte-identical for a fixed seed") {
    const auto a = make_pref_dataset(30, hundred(), 8, 1);
    const auto b = make_pref_dataset(30, hundred(), 8, 1);
    REQUIRE(a.ratings.size() == b.ratings.size());
    for (std::size_t i = 0; i < a.ratings.size(); ++i) CHECK(to_json(a.ratings[i]).dump() == to_json(b.ratings[i]).dump());
    for (std::size_t i = 0; i < a.pairs.size(); ++i) CHECK(a.pairs[i].to_json().dump() == b.pairs[i].to_json().dump());
    const auto [w1, l1] = render_pair(a.pairs[3]);
    const auto [w2, l2] = render_pair(b.pairs[3]);
    CHECK(w1.frames.values() == w2.frames.values());
    CHECK(l1.frames.values() == l2.frames.values());
}

TEST_CASE("every toy pair survives QC and T1 as generated") {
    const auto ds = make_pref_dataset(60, hundred(), 12, 2);
    const auto t0 = run_t0(ds.ratings);
    CHECK(t0.qc.retained_raters.size() + 2 == t0.qc.reports.size());
    std::set<std::tuple<std::string, std::string, std::string>> want, got;
    for (const auto& p : ds.pairs) want.emplace(p.group_id, p.winner, p.loser);
    for (const auto& p : t1_enumerate_pairs(t0.videos)) {
        got.emplace(p.group_id, p.winner, p.loser);
        CHECK(p.margin >= 3.0);
    }
    CHECK(got == want);
}

TEST_CASE("PPM frames carry a P6 header") {
    ToyParams p;
    p.x0 = 12.0;
    p.y0 = 8.0;
    p.radius = 3.0;
    const auto clip = gen_clip(p, 21, 16, 24, 1);
    const auto ppm = frame_to_ppm(clip.frames, 2);
    CHECK(ppm.rfind("P6\n24 16\n255\n", 0) == 0);
    CHECK(ppm.size() == std::string("P6\n24 16\n255\n").size() + 16 * 24 * 3);
}
