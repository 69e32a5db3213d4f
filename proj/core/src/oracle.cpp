// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "physpref/conditioning.hpp"
#include "physpref/error.hpp"

namespace physpref {

namespace {

constexpr double kMinContrast = 0.05;
constexpr double kCoverageFloor = 0.05;
constexpr double kInteriorFraction = 0.98;

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

// 5 at or below b[0], ..., 2 at or below b[3], else 1.
int band(double residual, const std::array<double, 4>& b) {
    if (!std::isfinite(residual)) return 1;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (residual <= b[i]) return 5 - static_cast<int>(i);
    }
    return 1;
}

constexpr std::array<double, 4> kPresenceBands = {0.0, 0.05, 0.15, 0.3};
constexpr std::array<double, 4> kMassBands = {0.06, 0.12, 0.2, 0.35};
constexpr std::array<double, 4> kColorBands = {0.03, 0.06, 0.12, 0.2};
constexpr std::array<double, 4> kSpikeBands = {0.3, 0.6, 1.0, 1.5};
constexpr std::array<double, 4> kDriftBands = {0.04, 0.08, 0.12, 0.16};
constexpr std::array<double, 4> kTeleportBands = {1.0, 2.0, 3.0, 5.0};

// Latent-domain bands; the first sits above the largest clean residual of
// a 1000-seed sweep.
constexpr std::array<double, 4> kLatentPresenceBands = {0.0, 0.08, 0.16, 0.31};
constexpr std::array<double, 4> kLatentMassBands = {0.03, 0.08, 0.15, 0.3};
constexpr std::array<double, 4> kLatentColorBands = {0.03, 0.1, 0.25, 0.45};
constexpr std::array<double, 4> kLatentSpikeBands = {0.45, 0.7, 1.0, 1.5};
constexpr std::array<double, 4> kLatentEnergyBands = {0.1, 0.2, 0.4, 0.8};
constexpr std::array<double, 4> kLatentTeleportBands = {1.6, 2.2, 3.0, 4.0};

// Per-dimension scores from the six banded residual scores.
std::map<std::string, int> dimension_scores(int presence, int mass, int color, int spike, int drift, int teleport) {
    std::map<std::string, int> s;
    s["sa"] = presence;
    s["ptv"] = std::min({spike, drift, teleport});
    s["persistence"] = std::min({color, teleport, mass});
    s["collision_rebound"] = mass;
    s["destruction_deformation"] = std::min(mass, teleport);
    s["fluids"] = std::min(mass, presence);
    s["shadow_reflection"] = color;
    s["rolling_sliding"] = spike;
    s["throwing_ballistic"] = drift;
    s["chain"] = std::min(s["ptv"], s["collision_rebound"]);
    return s;
}

double norm3(const std::array<double, 3>& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

struct LatentObservation {
    double mass = 0.0;
    std::array<double, 3> deviation = {0.0, 0.0, 0.0};
    double cx = 0.0;
    double cy = 0.0;
    double t = 0.0;
};

}  // namespace

std::vector<FrameObservation> observe(const Tensor4& frames) {
    const auto& s = frames.shape();
    if (s.c != 3) throw ValidationError("oracle needs 3-channel pixel frames, got " + s.str());
    const auto n = s.frame_size();
    std::vector<FrameObservation> out(static_cast<std::size_t>(s.t));
    std::vector<double> dist(n);
    std::vector<double> scratch(n);
    for (int k = 0; k < s.t; ++k) {
        std::array<double, 3> bg{};
        for (int c = 0; c < 3; ++c) {
            const double* p = frames.data() + frames.index(c, k, 0, 0);
            scratch.assign(p, p + n);
            bg[static_cast<std::size_t>(c)] = median_of(scratch);
        }
        double maxd = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d2 = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double diff = frames.data()[frames.index(c, k, 0, 0) + i] - bg[static_cast<std::size_t>(c)];
                d2 += diff * diff;
            }
            dist[i] = std::sqrt(d2);
            maxd = std::max(maxd, dist[i]);
        }
        auto& ob = out[static_cast<std::size_t>(k)];
        if (maxd < kMinContrast) continue;
        double mass = 0.0, sx = 0.0, sy = 0.0;
        std::array<double, 3> col{};
        std::size_t interior = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double cov = std::min(1.0, dist[i] / maxd);
            if (cov < kCoverageFloor) continue;
            const auto row = static_cast<double>(i / static_cast<std::size_t>(s.w));
            const auto colx = static_cast<double>(i % static_cast<std::size_t>(s.w));
            mass += cov;
            sx += cov * (colx + 0.5);
            sy += cov * (row + 0.5);
            if (dist[i] >= kInteriorFraction * maxd) {
                for (int c = 0; c < 3; ++c) col[static_cast<std::size_t>(c)] += frames.data()[frames.index(c, k, 0, 0) + i];
                ++interior;
            }
        }
        if (mass < 1.0) continue;
        ob.visible = true;
        ob.mass = mass;
        ob.centroid = {sx / mass, sy / mass};
        for (auto& v : col) v /= static_cast<double>(interior);
        ob.color = col;
    }
    return out;
}

Json OracleResiduals::to_json() const {
    return Json{{"presence", presence}, {"mass", mass},   {"color", color},
                {"spike", spike},       {"drift", drift}, {"teleport", teleport}};
}

OracleResiduals oracle_residuals(const Tensor4& frames) {
    const auto obs = observe(frames);
    const int T = static_cast<int>(obs.size());
    OracleResiduals res;

    std::vector<double> ref_mass;
    std::array<std::vector<double>, 3> ref_color;
    for (int k = 0; k < std::min(T, kOracleReferenceFrames); ++k) {
        const auto& o = obs[static_cast<std::size_t>(k)];
        if (!o.visible) continue;
        ref_mass.push_back(o.mass);
        for (std::size_t c = 0; c < 3; ++c) ref_color[c].push_back(o.color[c]);
    }
    if (ref_mass.empty()) {
        res.presence = 1.0;
        res.mass = 1.0;
        res.color = 1.0;
        res.spike = res.drift = res.teleport = std::numeric_limits<double>::infinity();
        return res;
    }
    const double m_ref = median_of(ref_mass);
    const std::array<double, 3> c_ref = {median_of(ref_color[0]), median_of(ref_color[1]), median_of(ref_color[2])};
    const double r_est = std::sqrt(m_ref / std::numbers::pi);
    const auto& shape = frames.shape();

    // Frames with most of the ball in view have a trustworthy centroid.
    std::vector<bool> tracked(static_cast<std::size_t>(T), false);
    int missing = 0;
    for (int k = 0; k < T; ++k) {
        const auto& o = obs[static_cast<std::size_t>(k)];
        const double m = o.visible ? o.mass : 0.0;
        if (m < 0.25 * m_ref) ++missing;
        res.mass = std::max(res.mass, std::abs(m - m_ref) / m_ref);
        if (o.visible && m >= 0.25 * m_ref) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < 3; ++c) d2 += (o.color[c] - c_ref[c]) * (o.color[c] - c_ref[c]);
            res.color = std::max(res.color, std::sqrt(d2));
        }
        tracked[static_cast<std::size_t>(k)] = o.visible && m >= 0.5 * m_ref;
    }
    res.presence = static_cast<double>(missing) / static_cast<double>(T);

    auto centre = [&](int k) { return obs[static_cast<std::size_t>(k)].centroid; };
    auto trk = [&](int k) { return k >= 0 && k < T && tracked[static_cast<std::size_t>(k)]; };

    // Horizontal speed never grows without a cause: flight keeps it, walls
    // scale it by the restitution, and a frame straddling a wall contact
    // shows a shorter net step.
    double running = -1.0;
    for (int k = 0; k + 1 < T; ++k) {
        if (!trk(k) || !trk(k + 1)) continue;
        const double step = std::abs(centre(k + 1)[0] - centre(k)[0]);
        if (running >= 0.0) res.spike = std::max(res.spike, step - running);
        running = std::max(running, step);
    }

    // Second differences of the centroid.
    std::vector<std::optional<std::array<double, 2>>> acc(static_cast<std::size_t>(T));
    std::vector<bool> in_flight(static_cast<std::size_t>(T), false);
    for (int k = 1; k + 1 < T; ++k) {
        if (!trk(k - 1) || !trk(k) || !trk(k + 1)) continue;
        const auto a = centre(k - 1), b = centre(k), c = centre(k + 1);
        acc[static_cast<std::size_t>(k)] = std::array<double, 2>{c[0] - 2 * b[0] + a[0], c[1] - 2 * b[1] + a[1]};
        // Side walls only flip vx, so vertical clearance is what matters.
        const double speed = std::max(std::abs(b[1] - a[1]), std::abs(c[1] - b[1]));
        const double margin = r_est + 1.5 + speed;
        bool clear = true;
        for (const auto& p : {a, b, c}) {
            if (p[1] < margin || p[1] > shape.h - margin) clear = false;
        }
        in_flight[static_cast<std::size_t>(k)] = clear;
    }

    // Gravity pulls down: a free-flight window accelerating upward is a
    // violation, and so is a ball resting against the ceiling.
    for (int k = 1; k + 3 < T; ++k) {
        if (!in_flight[static_cast<std::size_t>(k)] || !in_flight[static_cast<std::size_t>(k + 1)] ||
            !in_flight[static_cast<std::size_t>(k + 2)]) {
            continue;
        }
        const double m = median_of({(*acc[static_cast<std::size_t>(k)])[1], (*acc[static_cast<std::size_t>(k + 1)])[1],
                                    (*acc[static_cast<std::size_t>(k + 2)])[1]});
        res.drift = std::max(res.drift, -m);
    }
    int ceiling_run = 0;
    for (int k = 0; k < T; ++k) {
        if (trk(k) && centre(k)[1] - r_est < 1.0) {
            if (++ceiling_run >= 3) res.drift = std::max(res.drift, 1.0);
        } else {
            ceiling_run = 0;
        }
    }

    // A jump in position shows up as a pulse pair of opposite sign on one
    // axis; a wall contact gives pulses of one sign.
    for (int k = 1; k + 2 < T; ++k) {
        const auto& a = acc[static_cast<std::size_t>(k)];
        const auto& b = acc[static_cast<std::size_t>(k + 1)];
        if (!a || !b) continue;
        for (std::size_t ax = 0; ax < 2; ++ax) {
            if ((*a)[ax] * (*b)[ax] >= 0.0) continue;
            res.teleport = std::max(res.teleport, std::min(std::abs((*a)[ax]), std::abs((*b)[ax])));
        }
    }
    return res;
}

std::map<std::string, int> oracle_scores(const OracleResiduals& r) {
    return dimension_scores(band(r.presence, kPresenceBands), band(r.mass, kMassBands), band(r.color, kColorBands),
                            band(r.spike, kSpikeBands), band(r.drift, kDriftBands), band(r.teleport, kTeleportBands));
}

std::map<std::string, int> oracle_scores(const Tensor4& frames) { return oracle_scores(oracle_residuals(frames)); }

Json LatentOracleResiduals::to_json() const {
    return Json{{"presence", presence}, {"mass", mass},     {"color", color},
                {"spike", spike},       {"energy", energy}, {"teleport", teleport}};
}

LatentOracleResiduals latent_oracle_residuals(const Tensor4& latent) {
    const Shape4& ls = latent.shape();
    if (ls.c < 3 || ls.t < kLatentReferenceFrames + 2) {
        throw ValidationError("latent oracle needs >= 3 channels and >= " + std::to_string(kLatentReferenceFrames + 2) +
                              " latent frames, got " + ls.str());
    }
    constexpr double S = ToyCodec::kSpatialStride;
    constexpr double stride = ToyCodec::kTemporalStride;
    const double height = ls.h * S;
    const double block_area = S * S;

    std::vector<LatentObservation> obs(static_cast<std::size_t>(ls.t));
    for (int k = 0; k < ls.t; ++k) {
        auto& o = obs[static_cast<std::size_t>(k)];
        o.t = k == 0 ? 0.0 : 0.5 * (stride + 1.0) + stride * (k - 1);
        std::array<double, 3> bg{};
        for (int c = 0; c < 3; ++c) {
            std::vector<double> v;
            v.reserve(static_cast<std::size_t>(ls.h * ls.w));
            for (int y = 0; y < ls.h; ++y) {
                for (int x = 0; x < ls.w; ++x) v.push_back(latent(c, k, y, x));
            }
            bg[static_cast<std::size_t>(c)] = median_of(std::move(v));
        }
        double weight = 0.0;
        for (int y = 0; y < ls.h; ++y) {
            for (int x = 0; x < ls.w; ++x) {
                std::array<double, 3> dv{};
                for (std::size_t c = 0; c < 3; ++c) {
                    dv[c] = latent(static_cast<int>(c), k, y, x) - bg[c];
                    o.deviation[c] += dv[c];
                }
                const double d = norm3(dv);
                weight += d;
                o.cx += d * (x + 0.5) * S;
                o.cy += d * (y + 0.5) * S;
            }
        }
        o.mass = weight * block_area;
        if (weight > 0.0) {
            o.cx /= weight;
            o.cy /= weight;
        }
    }

    LatentOracleResiduals res;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> ref_mass;
    std::array<std::vector<double>, 3> ref_dir;
    for (int k = 0; k < kLatentReferenceFrames; ++k) {
        const auto& o = obs[static_cast<std::size_t>(k)];
        ref_mass.push_back(o.mass);
        const double n = norm3(o.deviation);
        for (std::size_t c = 0; c < 3; ++c) ref_dir[c].push_back(n > 0.0 ? o.deviation[c] / n : 0.0);
    }
    const double m_ref = median_of(ref_mass);
    std::array<double, 3> u{};
    for (std::size_t c = 0; c < 3; ++c) u[c] = median_of(ref_dir[c]);
    const double un = norm3(u);
    if (!(m_ref > 1e-9) || !std::isfinite(m_ref) || !(un > 0.0)) return {1.0, inf, inf, inf, inf, inf};
    for (auto& x : u) x /= un;

    int absent = 0;
    for (const auto& o : obs) {
        if (o.mass < 0.25 * m_ref) {
            ++absent;
            res.mass = std::max(res.mass, 1.0);
            continue;
        }
        res.mass = std::max(res.mass, std::abs(o.mass - m_ref) / m_ref);
        const double n = norm3(o.deviation);
        if (n <= 0.0) continue;
        double d2 = 0.0;
        for (std::size_t c = 0; c < 3; ++c) d2 += std::pow(o.deviation[c] / n - u[c], 2);
        res.color = std::max(res.color, std::sqrt(d2));
    }
    res.presence = static_cast<double>(absent) / ls.t;

    // Velocities between consecutive latent frames, valid when both frames track the ball.
    const std::size_t nv = obs.size() - 1;
    std::vector<double> vx(nv), vy(nv), tv(nv);
    std::vector<bool> tracked(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        const auto& a = obs[i];
        const auto& b = obs[i + 1];
        const double dt = b.t - a.t;
        vx[i] = (b.cx - a.cx) / dt;
        vy[i] = (b.cy - a.cy) / dt;
        tv[i] = 0.5 * (a.t + b.t);
        tracked[i] = a.mass >= 0.5 * m_ref && b.mass >= 0.5 * m_ref;
    }

    double run = 0.0;
    for (std::size_t i = 0; i < nv; ++i) {
        if (!tracked[i]) continue;
        const double speed = std::abs(vx[i]);
        if (i >= 2 && run > 0.0) res.spike = std::max(res.spike, (speed - run) / run);
        run = std::max(run, speed);
    }

    // Gravity from the opening in-flight accelerations, falling back to the
    // middle of the toy range.
    const auto ref_steps = static_cast<std::size_t>(kLatentReferenceFrames - 1);
    std::vector<double> g_samples;
    for (std::size_t i = 1; i < ref_steps && i < nv; ++i) {
        const double a = (vy[i] - vy[i - 1]) / (tv[i] - tv[i - 1]);
        if (a > 0.05 && a < 0.6) g_samples.push_back(a);
    }
    const double g = g_samples.empty() ? 0.25 : median_of(g_samples);
    double e_ref = 0.0;
    for (std::size_t i = 0; i < nv; ++i) {
        if (!tracked[i]) continue;
        const double y = 0.5 * (obs[i].cy + obs[i + 1].cy);
        const double e = 0.5 * (vx[i] * vx[i] + vy[i] * vy[i]) + g * (height - y);
        if (i < ref_steps) {
            e_ref = std::max(e_ref, e);
        } else if (e_ref > 0.0) {
            res.energy = std::max(res.energy, (e - e_ref) / e_ref);
        }
    }

    for (const auto* vel : {&vx, &vy}) {
        const auto& v = *vel;
        for (std::size_t i = 1; i + 1 < nv; ++i) {
            if (!tracked[i - 1] || !tracked[i] || !tracked[i + 1]) continue;
            const double outlier = std::min(std::abs(v[i] - v[i - 1]), std::abs(v[i] - v[i + 1])) -
                                   0.5 * std::abs(v[i + 1] - v[i - 1]);
            res.teleport = std::max(res.teleport, outlier);
        }
    }
    return res;
}

std::map<std::string, int> latent_oracle_scores(const LatentOracleResiduals& r) {
    return dimension_scores(band(r.presence, kLatentPresenceBands), band(r.mass, kLatentMassBands),
                            band(r.color, kLatentColorBands), band(r.spike, kLatentSpikeBands),
                            band(r.energy, kLatentEnergyBands), band(r.teleport, kLatentTeleportBands));
}

std::map<std::string, int> latent_oracle_scores(const Tensor4& latent) {
    return latent_oracle_scores(latent_oracle_residuals(latent));
}

int oracle_total(const std::map<std::string, int>& scores) {
    int total = 0;
    for (const auto& [dim, v] : scores) total += v;
    return total;
}

}  // namespace physpref
