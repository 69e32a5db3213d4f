// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/toyworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "physpref/error.hpp"
#include "physpref/rng.hpp"

namespace physpref {

namespace {

constexpr double kTimeEps = 1e-9;
constexpr double kRestHeight = 0.25;  // bounce apex below this settles the ball
constexpr double kHueDriftPerFrame = 0.015;
constexpr int kOnsetSpan = 12;

struct Scene {
    double r = 5.0;
    double e = 1.0;
    double W = 64.0;
    double H = 64.0;
    double xmin() const { return r; }
    double xmax() const { return W - r; }
    double ymin() const { return r; }
    double ymax() const { return H - r; }
};

struct SimState {
    double x = 0.0;
    double y = 0.0;
    double vx = 0.0;
    double vy = 0.0;
    double g = 0.0;
    bool walls = true;
    bool resting = false;  // sitting on the wall gravity points at
};

// Smallest t > eps with y + vy t + g t^2 / 2 == target, moving toward the
// wall on the `positive` side (or away from it when !positive).
double quadratic_hit(double y, double vy, double g, double target, bool positive) {
    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](double t) {
        if (!(t > kTimeEps)) return;
        const double v = vy + g * t;
        if (positive ? v > 0.0 : v < 0.0) best = std::min(best, t);
    };
    const double c = y - target;
    if (g == 0.0) {
        if (vy != 0.0) consider(-c / vy);
        return best;
    }
    const double a = 0.5 * g;
    const double disc = vy * vy - 4.0 * a * c;
    if (disc < 0.0) return best;
    const double sq = std::sqrt(disc);
    // Numerically stable pair of roots.
    const double q = -0.5 * (vy + std::copysign(sq, vy == 0.0 ? 1.0 : vy));
    if (q != 0.0) {
        consider(q / a);
        consider(c / q);
    } else {
        consider(sq / (2.0 * a));
        consider(-sq / (2.0 * a));
    }
    return best;
}

void drift(SimState& s, double dt) {
    s.x += s.vx * dt;
    if (!s.resting) {
        s.y += s.vy * dt + 0.5 * s.g * dt * dt;
        s.vy += s.g * dt;
    }
}

void advance(SimState& s, double dt, const Scene& sc, double t_now, std::vector<BounceEvent>* events) {
    const double rest_speed = std::sqrt(2.0 * std::abs(s.g) * kRestHeight);
    for (int guard = 0; dt > 0.0; ++guard) {
        if (guard > 100000) throw NumericalError("toy simulation did not converge");
        if (!s.walls) {
            drift(s, dt);
            return;
        }
        double t_hit = std::numeric_limits<double>::infinity();
        int wall = -1;
        if (s.vx > 0.0) {
            t_hit = (sc.xmax() - s.x) / s.vx;
            wall = 1;
        } else if (s.vx < 0.0) {
            t_hit = (sc.xmin() - s.x) / s.vx;
            wall = 0;
        }
        if (!(t_hit > kTimeEps)) t_hit = std::numeric_limits<double>::infinity();
        if (!s.resting) {
            const double t_floor = quadratic_hit(s.y, s.vy, s.g, sc.ymax(), true);
            const double t_ceil = quadratic_hit(s.y, s.vy, s.g, sc.ymin(), false);
            if (t_floor < t_hit) {
                t_hit = t_floor;
                wall = 3;
            }
            if (t_ceil < t_hit) {
                t_hit = t_ceil;
                wall = 2;
            }
        }
        if (t_hit > dt) {
            drift(s, dt);
            return;
        }
        drift(s, t_hit);
        t_now += t_hit;
        dt -= t_hit;
        if (wall <= 1) {
            if (events) events->push_back({t_now, std::abs(s.vx), wall});
            s.x = wall == 0 ? sc.xmin() : sc.xmax();
            s.vx = -sc.e * s.vx;
        } else {
            if (events) events->push_back({t_now, std::abs(s.vy), wall});
            s.y = wall == 2 ? sc.ymin() : sc.ymax();
            s.vy = -sc.e * s.vy;
            const bool toward_gravity = (wall == 3 && s.g > 0.0) || (wall == 2 && s.g < 0.0);
            if (toward_gravity && std::abs(s.vy) < rest_speed) {
                s.vy = 0.0;
                s.resting = true;
            }
        }
    }
}

struct Modifier {
    std::optional<Corruption> mode;
    int onset = -1;
    double jump_dx = 0.0;
    double jump_dy = 0.0;
};

void apply_modifier(SimState& s, const Modifier& m, const Scene& sc) {
    switch (*m.mode) {
        case Corruption::WallPass:
            s.walls = false;
            s.resting = false;
            break;
        case Corruption::GravityFlip:
            s.g = -s.g;
            s.resting = false;
            break;
        case Corruption::SpeedJump:
            s.vx *= 3.0;
            s.vy *= 3.0;
            break;
        case Corruption::ColorDrift:
            break;
        case Corruption::Teleport:
            s.x += m.jump_dx;
            s.y += m.jump_dy;
            if (s.resting && s.y < sc.ymax()) s.resting = false;
            break;
    }
}

struct Trajectory {
    std::vector<std::array<double, 2>> centers;
    std::vector<double> vx;  // horizontal velocity at each frame
    std::vector<BounceEvent> bounces;
};

Trajectory simulate(const ToyParams& p, int T, int H, int W, const Modifier& mod = {}) {
    const Scene sc{p.radius, p.restitution, static_cast<double>(W), static_cast<double>(H)};
    SimState s;
    s.x = std::clamp(p.x0, sc.xmin(), sc.xmax());
    s.y = std::clamp(p.y0, sc.ymin(), sc.ymax());
    s.vx = p.vx;
    s.vy = p.vy;
    s.g = p.gravity;
    s.resting = s.g > 0.0 && s.y >= sc.ymax() && s.vy == 0.0;
    Trajectory tr;
    tr.centers.reserve(static_cast<std::size_t>(T));
    for (int k = 0; k < T; ++k) {
        if (k > 0) advance(s, 1.0, sc, k - 1.0, &tr.bounces);
        if (mod.mode && k == mod.onset) apply_modifier(s, mod, sc);
        tr.centers.push_back({s.x, s.y});
        tr.vx.push_back(s.vx);
    }
    return tr;
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h);
    const double hh = h * 6.0;
    const int sector = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

void render(ToyClip& clip, int T, int H, int W) {
    clip.frames = Tensor4(Shape4{3, T, H, W}, Semantics::Pixels, clip.background);
    const double r = clip.params.radius;
    for (int k = 0; k < T; ++k) {
        double hue = clip.params.hsv[0];
        if (clip.corruption == Corruption::ColorDrift && k >= clip.onset) {
            hue += kHueDriftPerFrame * (k - clip.onset);
        }
        const auto rgb = hsv_to_rgb(hue, clip.params.hsv[1], clip.params.hsv[2]);
        const auto [cx, cy] = clip.centers[static_cast<std::size_t>(k)];
        const int i0 = std::max(0, static_cast<int>(std::floor(cy - r - 1.0)));
        const int i1 = std::min(H - 1, static_cast<int>(std::ceil(cy + r + 1.0)));
        const int j0 = std::max(0, static_cast<int>(std::floor(cx - r - 1.0)));
        const int j1 = std::min(W - 1, static_cast<int>(std::ceil(cx + r + 1.0)));
        for (int i = i0; i <= i1; ++i) {
            for (int j = j0; j <= j1; ++j) {
                const double d = std::hypot(j + 0.5 - cx, i + 0.5 - cy);
                const double cov = std::clamp(r + 0.5 - d, 0.0, 1.0);
                if (cov <= 0.0) continue;
                for (int c = 0; c < 3; ++c) {
                    clip.frames(c, k, i, j) = clip.background + cov * (rgb[static_cast<std::size_t>(c)] - clip.background);
                }
            }
        }
    }
}

ToyClip make_clip(const ToyParams& p, int T, int H, int W, std::uint64_t seed, const Modifier& mod) {
    if (T < kConditioningFrames + 1 || H < 16 || W < 16) {
        throw ValidationError("toy clip needs at least 18 frames and 16x16 pixels");
    }
    if (!(p.radius >= 1.0) || 4.0 * p.radius > std::min(H, W)) throw ValidationError("toy radius out of range");
    if (!(p.restitution > 0.0 && p.restitution <= 1.0)) throw ValidationError("restitution must be in (0, 1]");
    ToyClip clip;
    clip.params = p;
    clip.seed = seed;
    SplitMix64 bg(derive_seed(seed, "background"));
    clip.background = 0.05 + 0.2 * bg.uniform01();
    auto tr = simulate(p, T, H, W, mod);
    clip.centers = std::move(tr.centers);
    clip.bounces = std::move(tr.bounces);
    clip.corruption = mod.mode;
    clip.onset = mod.onset;
    render(clip, T, H, W);
    return clip;
}

}  // namespace

Json ToyParams::to_json() const {
    return Json{{"x0", x0},
                {"y0", y0},
                {"vx", vx},
                {"vy", vy},
                {"gravity", gravity},
                {"restitution", restitution},
                {"radius", radius},
                {"hsv", hsv}};
}

ToyParams ToyParams::from_json(const Json& j) {
    ToyParams p;
    try {
        p.x0 = j.at("x0").get<double>();
        p.y0 = j.at("y0").get<double>();
        p.vx = j.at("vx").get<double>();
        p.vy = j.at("vy").get<double>();
        p.gravity = j.at("gravity").get<double>();
        p.restitution = j.at("restitution").get<double>();
        p.radius = j.at("radius").get<double>();
        p.hsv = j.at("hsv").get<std::array<double, 3>>();
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("bad toy params: ") + e.what());
    }
    return p;
}

std::string_view to_string(Corruption c) noexcept {
    switch (c) {
        case Corruption::WallPass: return "wall_pass";
        case Corruption::GravityFlip: return "gravity_flip";
        case Corruption::SpeedJump: return "speed_jump";
        case Corruption::ColorDrift: return "color_drift";
        case Corruption::Teleport: return "teleport";
    }
    return "wall_pass";
}

Corruption corruption_from_string(std::string_view name) {
    for (const auto c : kAllCorruptions) {
        if (to_string(c) == name) return c;
    }
    throw ValidationError("unknown corruption '" + std::string(name) + "'");
}

ToyClip gen_clip(const ToyParams& params, int T, int H, int W, std::uint64_t seed) {
    return make_clip(params, T, H, W, seed, {});
}

ToyParams sample_params(std::uint64_t seed, int T, int H, int W) {
    SplitMix64 rng(derive_seed(seed, "params"));
    for (int attempt = 0; attempt < 10000; ++attempt) {
        ToyParams p;
        p.radius = rng.uniform(4.0, 6.0);
        p.restitution = rng.uniform(0.75, 0.95);
        p.gravity = rng.uniform(0.15, 0.35);
        p.vx = rng.uniform(1.5, 2.5) * (rng.bounded(2) == 0 ? 1.0 : -1.0);
        p.vy = rng.uniform(-3.0, 1.0);
        p.x0 = rng.uniform(p.radius + 2.0, W - p.radius - 2.0);
        p.y0 = rng.uniform(p.radius + 12.0, H - p.radius - 8.0);
        p.hsv = {rng.uniform01(), rng.uniform(0.6, 0.9), rng.uniform(0.75, 0.95)};

        const auto tr = simulate(p, T, H, W);
        const bool clear_of_ceiling = std::all_of(tr.centers.begin(), tr.centers.end(),
                                                  [&](const auto& c) { return c[1] - p.radius >= 3.0; });
        bool moving = true;
        for (int k = 0; k < std::min(T, 46); ++k) {
            if (std::abs(tr.vx[static_cast<std::size_t>(k)]) < 1.0) moving = false;
        }
        const bool bounce = std::any_of(tr.bounces.begin(), tr.bounces.end(), [&](const BounceEvent& b) {
            return b.time > kConditioningFrames && b.time < std::min(40.0, T - 9.0) && b.normal_speed >= 1.0 &&
                   b.wall != 2;
        });
        if (clear_of_ceiling && moving && bounce) return p;
    }
    throw NumericalError("could not sample toy parameters for seed " + std::to_string(seed));
}

ToyClip corrupt(const ToyClip& clip, Corruption mode, std::uint64_t seed) {
    if (clip.corruption) throw ValidationError("clip is already corrupted");
    const int T = clip.frames.shape().t;
    const int H = clip.frames.shape().h;
    const int W = clip.frames.shape().w;
    SplitMix64 rng(derive_seed(seed, "corrupt"));
    Modifier mod;
    mod.mode = mode;
    int latest = std::min(kConditioningFrames + kOnsetSpan - 1, T - 2);
    if (mode == Corruption::WallPass) {
        // The violation must happen: start no later than the first real bounce.
        const auto it = std::find_if(clip.bounces.begin(), clip.bounces.end(), [](const BounceEvent& b) {
            return b.time > kConditioningFrames && b.normal_speed >= 1.0;
        });
        if (it == clip.bounces.end()) throw ValidationError("wall_pass needs a bounce after the conditioning prefix");
        latest = std::min(latest, static_cast<int>(std::floor(it->time)));
    }
    mod.onset = kConditioningFrames + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(latest - kConditioningFrames + 1)));
    if (mode == Corruption::Teleport) {
        const double r = clip.params.radius;
        const double dist = 3.0 * r + rng.uniform(0.0, 4.0);
        const auto start = rng.bounded(8);
        const auto [cx, cy] = clip.centers[static_cast<std::size_t>(mod.onset)];
        bool placed = false;
        for (std::uint64_t i = 0; i < 8 && !placed; ++i) {
            const double angle = 2.0 * M_PI * static_cast<double>((start + i) % 8) / 8.0;
            const double dx = dist * std::cos(angle);
            const double dy = dist * std::sin(angle);
            if (cx + dx >= r + 1.0 && cx + dx <= W - r - 1.0 && cy + dy >= r + 1.0 && cy + dy <= H - r) {
                mod.jump_dx = dx;
                mod.jump_dy = dy;
                placed = true;
            }
        }
        if (!placed) throw ValidationError("no room to teleport the ball");
    }
    return make_clip(clip.params, T, H, W, clip.seed, mod);
}

std::string toy_prompt(EventClass c, std::string_view color) {
    const std::string col(color);
    switch (c) {
        case EventClass::A: return "A " + col + " ball bounces off the floor and walls";
        case EventClass::B: return "A " + col + " glass ball shatters on impact";
        case EventClass::C: return "A " + col + " droplet of syrup drips into a pool";
        case EventClass::D: return "A " + col + " ball casts a moving shadow";
        case EventClass::E: return "A " + col + " ball triggers a chain of events";
        case EventClass::F: return "A " + col + " ball rolls across the table";
        case EventClass::G: return "A " + col + " ball is thrown through the air";
        case EventClass::Unclassified: return "A " + col + " sphere drifts around the room";
    }
    return {};
}

std::string_view toy_law(EventClass c) noexcept {
    switch (c) {
        case EventClass::A: return "collision_rebound";
        case EventClass::B: return "destruction_deformation";
        case EventClass::C: return "fluids";
        case EventClass::D: return "shadow_reflection";
        case EventClass::E: return "chain";
        case EventClass::F: return "rolling_sliding";
        case EventClass::G: return "throwing_ballistic";
        case EventClass::Unclassified: return "collision_rebound";
    }
    return "collision_rebound";
}

double toy_hue(std::string_view color) {
    static constexpr std::array<double, 8> hues = {0.0, 0.08, 0.15, 0.33, 0.48, 0.62, 0.75, 0.9};
    for (std::size_t i = 0; i < kToyColors.size(); ++i) {
        if (kToyColors[i] == color) return hues[i];
    }
    throw ValidationError("unknown toy color '" + std::string(color) + "'");
}

Json ToyPairRecord::to_json() const {
    return Json{{"prompt_id", prompt_id},
                {"group_id", group_id},
                {"prompt", prompt},
                {"color", color},
                {"law", law},
                {"event_class", std::string(physpref::to_string(event_class))},
                {"winner", winner},
                {"loser", loser},
                {"corruption", std::string(physpref::to_string(corruption))},
                {"clip_seed", clip_seed},
                {"corruption_seed", corruption_seed}};
}

namespace {

Corruption corruption_for(EventClass c, SplitMix64& rng) {
    switch (c) {
        case EventClass::A: return Corruption::WallPass;
        case EventClass::B: return Corruption::Teleport;
        case EventClass::C: return Corruption::WallPass;
        case EventClass::D: return Corruption::ColorDrift;
        case EventClass::F: return Corruption::SpeedJump;
        case EventClass::G: return Corruption::GravityFlip;
        case EventClass::E:
        case EventClass::Unclassified: break;
    }
    return kAllCorruptions[static_cast<std::size_t>(rng.bounded(kAllCorruptions.size()))];
}

RatingRecord toy_rating(const std::string& rater, const std::string& video, const ToyPairRecord& pair,
                        int lo, int hi, SplitMix64& rng) {
    const auto draw = [&] { return lo + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(hi - lo + 1))); };
    RatingRecord r;
    r.rater_id = rater;
    r.video_id = video;
    r.prompt_id = pair.prompt_id;
    r.group_id = pair.group_id;
    r.generator_id = video == pair.winner ? "toy-sim" : "toy-sim-corrupt";
    r.sa = draw();
    r.ptv = draw();
    r.persistence = draw();
    r.law_scores[pair.law] = draw();
    r.telemetry.stay_time_seconds = 6.0 + 10.0 * rng.uniform01();
    r.telemetry.play_count = 1 + static_cast<std::int64_t>(rng.bounded(3));
    return r;
}

}  // namespace

ToyDataset make_pref_dataset(std::size_t n_pairs, const QuotaMap& class_mix, std::uint64_t seed, int spam_raters) {
    if (n_pairs == 0) throw ValidationError("toy dataset needs at least one pair");
    ToyDataset ds;
    const auto quotas = scale_quotas(class_mix, n_pairs);
    std::vector<EventClass> classes;
    for (const auto& [c, n] : quotas) classes.insert(classes.end(), n, c);
    SplitMix64 class_rng(derive_seed(seed, "classes"));
    class_rng.shuffle(std::span<EventClass>(classes));

    std::vector<std::string> pool;
    for (int i = 0; i < 12; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "rater-%02d", i);
        pool.emplace_back(buf);
    }

    SplitMix64 rng(derive_seed(seed, "ratings"));
    for (std::size_t i = 0; i < n_pairs; ++i) {
        ToyPairRecord pr;
        char id[32];
        std::snprintf(id, sizeof id, "toy-p%04zu", i);
        pr.prompt_id = id;
        pr.event_class = classes[i];
        pr.law = std::string(toy_law(pr.event_class));
        pr.group_id = pr.prompt_id + "/" + pr.law;
        pr.color = std::string(kToyColors[static_cast<std::size_t>(rng.bounded(kToyColors.size()))]);
        pr.prompt = toy_prompt(pr.event_class, pr.color);
        pr.clip_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        pr.corruption_seed = derive_seed(pr.clip_seed, "corruption");
        pr.corruption = corruption_for(pr.event_class, rng);
        const bool a_wins = rng.bounded(2) == 0;
        pr.winner = pr.prompt_id + (a_wins ? "-a" : "-b");
        pr.loser = pr.prompt_id + (a_wins ? "-b" : "-a");

        auto raters = pool;
        rng.shuffle(std::span<std::string>(raters));
        const auto n_raters = 2 + static_cast<std::size_t>(rng.bounded(3));
        raters.resize(n_raters);
        std::sort(raters.begin(), raters.end());
        for (const auto& rater : raters) {
            ds.ratings.push_back(toy_rating(rater, pr.winner, pr, 4, 5, rng));
            ds.ratings.push_back(toy_rating(rater, pr.loser, pr, 1, 3, rng));
        }
        ds.pairs.push_back(std::move(pr));
    }

    for (int s = 0; s < spam_raters; ++s) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "spam-%02d", s);
        const auto n_videos = std::min<std::size_t>(20, 2 * n_pairs);
        for (std::size_t v = 0; v < n_videos; ++v) {
            const auto& pr = ds.pairs[static_cast<std::size_t>(rng.bounded(ds.pairs.size()))];
            RatingRecord r;
            r.rater_id = buf;
            r.video_id = rng.bounded(2) == 0 ? pr.winner : pr.loser;
            r.prompt_id = pr.prompt_id;
            r.group_id = pr.group_id;
            r.generator_id = r.video_id == pr.winner ? "toy-sim" : "toy-sim-corrupt";
            r.sa = 3;
            r.ptv = 3;
            r.persistence = 3;
            r.law_scores[pr.law] = 3;
            r.telemetry.stay_time_seconds = 1.0;
            r.telemetry.play_count = 1;
            ds.ratings.push_back(std::move(r));
        }
    }
    return ds;
}

std::pair<ToyClip, ToyClip> render_pair(const ToyPairRecord& pair, int T, int H, int W) {
    auto params = sample_params(pair.clip_seed, T, H, W);
    params.hsv[0] = toy_hue(pair.color);
    auto clean = gen_clip(params, T, H, W, pair.clip_seed);
    auto bad = corrupt(clean, pair.corruption, pair.corruption_seed);
    return {std::move(clean), std::move(bad)};
}

std::string frame_to_ppm(const Tensor4& frames, int frame) {
    const auto& s = frames.shape();
    if (s.c != 3 || frame < 0 || frame >= s.t) throw ValidationError("frame_to_ppm needs 3 channels and a valid frame");
    std::string out = "P6\n" + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
    out.reserve(out.size() + static_cast<std::size_t>(3 * s.h * s.w));
    for (int i = 0; i < s.h; ++i) {
        for (int j = 0; j < s.w; ++j) {
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(frames(c, frame, i, j), 0.0, 1.0);
                out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
            }
        }
    }
    return out;
}

}  // namespace physpref
