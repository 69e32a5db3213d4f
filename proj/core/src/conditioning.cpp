// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/conditioning.hpp"

#include <cmath>
#include <numbers>

#include "physpref/error.hpp"
#include "physpref/events.hpp"
#include "physpref/rng.hpp"

namespace physpref {

const std::array<double, 48>& ToyCodec::lift_matrix() {
    static const std::array<double, 48> m = [] {
        std::array<double, 48> out{};
        for (int k = 0; k < kLatentChannels; ++k) {
            for (int c = 0; c < 3; ++c) {
                double v;
                if (k < 3) {
                    v = k == c ? 1.0 : 0.0;
                } else {
                    v = 0.5 * std::cos(std::numbers::pi * (k - 2) * (2 * c + 1) / 6.0);
                }
                out[static_cast<std::size_t>(k * 3 + c)] = v;
            }
        }
        return out;
    }();
    return m;
}

Shape4 ToyCodec::latent_shape(const Shape4& p) {
    if (p.c != 3) {
        throw ValidationError("toy codec expects 3 pixel channels, got " + std::to_string(p.c));
    }
    if (p.t < 1 || (p.t - 1) % kTemporalStride != 0) {
        throw ValidationError("toy codec needs (T-1) % 4 == 0, got T=" + std::to_string(p.t));
    }
    if (p.h % kSpatialStride != 0 || p.w % kSpatialStride != 0 || p.h == 0 || p.w == 0) {
        throw ValidationError("toy codec needs H and W divisible by 8, got " + p.str());
    }
    return {kLatentChannels, 1 + (p.t - 1) / kTemporalStride, p.h / kSpatialStride, p.w / kSpatialStride};
}

Tensor4 ToyCodec::encode(const Tensor4& pixels) {
    const Shape4 ls = latent_shape(pixels.shape());
    const auto& lift = lift_matrix();
    Tensor4 out(ls, Semantics::Clean);
    constexpr int S = kSpatialStride;
    std::array<double, 3> pooled{};
    for (int k = 0; k < ls.t; ++k) {
        const int f0 = k == 0 ? 0 : 1 + (k - 1) * kTemporalStride;
        const int nf = k == 0 ? 1 : kTemporalStride;
        const double norm = 1.0 / (nf * S * S);
        for (int y = 0; y < ls.h; ++y) {
            for (int x = 0; x < ls.w; ++x) {
                for (int c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    for (int f = f0; f < f0 + nf; ++f) {
                        for (int dy = 0; dy < S; ++dy) {
                            for (int dx = 0; dx < S; ++dx) acc += pixels(c, f, y * S + dy, x * S + dx);
                        }
                    }
                    pooled[static_cast<std::size_t>(c)] = acc * norm;
                }
                for (int ch = 0; ch < ls.c; ++ch) {
                    double v = 0.0;
                    for (int c = 0; c < 3; ++c) v += lift[static_cast<std::size_t>(ch * 3 + c)] * pooled[static_cast<std::size_t>(c)];
                    out(ch, k, y, x) = v;
                }
            }
        }
    }
    return out;
}

Tensor4 ToyCodec::decode(const Tensor4& latent) {
    const Shape4& ls = latent.shape();
    if (ls.c < 3 || ls.t < 1) {
        throw ValidationError("toy decode needs >= 3 channels and >= 1 frame, got " + ls.str());
    }
    const Shape4 ps{3, 1 + kTemporalStride * (ls.t - 1), ls.h * kSpatialStride, ls.w * kSpatialStride};
    Tensor4 out(ps, Semantics::Pixels);
    for (int f = 0; f < ps.t; ++f) {
        const int k = f == 0 ? 0 : 1 + (f - 1) / kTemporalStride;
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < ps.h; ++y) {
                for (int x = 0; x < ps.w; ++x) {
                    out(c, f, y, x) = latent(c, k, y / kSpatialStride, x / kSpatialStride);
                }
            }
        }
    }
    return out;
}

Tensor4 build_condition_latent(const Tensor4& frames, int T) {
    const Shape4& s = frames.shape();
    const int R = s.t;
    if (R < 1 || (R - 1) % 4 != 0) {
        throw ValidationError("conditioning frame count R=" + std::to_string(R) + " needs (R-1) % 4 == 0");
    }
    if (T < R || (T - 1) % 4 != 0) {
        throw ValidationError("target length T=" + std::to_string(T) + " needs (T-1) % 4 == 0 and T >= R=" +
                              std::to_string(R));
    }
    Tensor4 padded({s.c, T, s.h, s.w}, Semantics::Pixels);
    for (int c = 0; c < s.c; ++c) {
        for (int f = 0; f < R; ++f) {
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) padded(c, f, y, x) = frames(c, f, y, x);
            }
        }
    }
    Tensor4 z = ToyCodec::encode(padded);
    z.set_tag(Semantics::Condition);
    return z;
}

Tensor4 build_mask(int R, int T, int s, int h, int w) {
    if (T < 1 || (T - 1) % 4 != 0) {
        throw ValidationError("build_mask: (T-1) % 4 != 0 for T=" + std::to_string(T));
    }
    if (R < 1 || R > T) {
        throw ValidationError("build_mask: need 1 <= R <= T, got R=" + std::to_string(R) + ", T=" +
                              std::to_string(T));
    }
    const int t = 1 + (T - 1) / 4;
    if (s < 1 || s * (t - 1) != T - 1) {
        throw ValidationError("build_mask: stride s=" + std::to_string(s) + " does not tile T-1=" +
                              std::to_string(T - 1) + " frames over " + std::to_string(t - 1) +
                              " latent frames");
    }
    if (h < 1 || w < 1) {
        throw ValidationError("build_mask: empty spatial extent");
    }
    const auto frame_on = [R](int f) { return f < R ? 1.0 : 0.0; };
    Tensor4 mask({s, t, h, w}, Semantics::Mask);
    for (int k = 0; k < t; ++k) {
        for (int j = 0; j < s; ++j) {
            const double v = k == 0 ? frame_on(0) : frame_on(1 + (k - 1) * s + j);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) mask(j, k, y, x) = v;
            }
        }
    }
    return mask;
}

std::vector<double> context_features(const Tensor4& frames) {
    const Shape4& s = frames.shape();
    if (s.t < 1) {
        throw ValidationError("context_features needs at least one frame");
    }
    if (s.h % 4 != 0 || s.w % 4 != 0 || s.h == 0 || s.w == 0) {
        throw ValidationError("context_features needs H and W divisible by 4, got " + s.str());
    }
    const int f = s.t - 1;
    const int ch = s.h / 4;
    const int cw = s.w / 4;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(s.c) * 16);
    for (int c = 0; c < s.c; ++c) {
        for (int gy = 0; gy < 4; ++gy) {
            for (int gx = 0; gx < 4; ++gx) {
                double acc = 0.0;
                for (int y = gy * ch; y < (gy + 1) * ch; ++y) {
                    for (int x = gx * cw; x < (gx + 1) * cw; ++x) acc += frames(c, f, y, x);
                }
                out.push_back(acc / (ch * cw));
            }
        }
    }
    return out;
}

std::vector<std::vector<double>> text_embedding(std::string_view prompt) {
    std::vector<std::vector<double>> out;
    for (const auto& word : tokenize_words(prompt)) {
        SplitMix64 rng(fnv1a64(word));
        std::vector<double> v(kTextEmbeddingDim);
        for (auto& x : v) x = rng.normal() * 0.25;
        out.push_back(std::move(v));
    }
    return out;
}

namespace {

std::vector<double> mean_rows(const std::vector<std::vector<double>>& rows) {
    std::vector<double> out(kTextEmbeddingDim, 0.0);
    if (rows.empty()) return out;
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += r[i];
    }
    for (auto& x : out) x /= static_cast<double>(rows.size());
    return out;
}

}  // namespace

std::vector<double> pooled_text_embedding(std::string_view prompt) { return mean_rows(text_embedding(prompt)); }

std::vector<double> ConditioningPack::pooled_text() const { return mean_rows(text_ctx); }

ConditioningPack make_conditioning(const Tensor4& frames, int R, int T, std::string_view prompt, int s) {
    const Shape4& fs = frames.shape();
    if (R < 1 || R > fs.t) {
        throw ValidationError("make_conditioning: R=" + std::to_string(R) + " outside the clip's " +
                              std::to_string(fs.t) + " frames");
    }
    Tensor4 head({fs.c, R, fs.h, fs.w}, Semantics::Pixels);
    for (int c = 0; c < fs.c; ++c) {
        for (int f = 0; f < R; ++f) {
            for (int y = 0; y < fs.h; ++y) {
                for (int x = 0; x < fs.w; ++x) head(c, f, y, x) = frames(c, f, y, x);
            }
        }
    }
    ConditioningPack pack;
    pack.z_c = build_condition_latent(head, T);
    pack.mask = build_mask(R, T, s, pack.z_c.shape().h, pack.z_c.shape().w);
    pack.ctx_features = context_features(head);
    pack.text_ctx = text_embedding(prompt);
    return pack;
}

Tensor4 assemble_input(const Tensor4& x_t, const Tensor4& z_c, const Tensor4& mask) {
    if (x_t.tag() != Semantics::Interpolant) {
        throw ValidationError("assemble_input: first block must be the interpolant x_t, got " +
                              std::string(to_string(x_t.tag())));
    }
    if (z_c.tag() != Semantics::Condition) {
        throw ValidationError("assemble_input: second block must be the condition latent, got " +
                              std::string(to_string(z_c.tag())));
    }
    if (mask.tag() != Semantics::Mask) {
        throw ValidationError("assemble_input: third block must be the mask, got " +
                              std::string(to_string(mask.tag())));
    }
    const Shape4& a = x_t.shape();
    const Shape4& b = z_c.shape();
    const Shape4& m = mask.shape();
    if (!(a == b) || m.t != a.t || m.h != a.h || m.w != a.w) {
        throw ValidationError("assemble_input: incompatible extents x_t " + a.str() + ", z_c " + b.str() +
                              ", mask " + m.str());
    }
    Tensor4 out({2 * a.c + m.c, a.t, a.h, a.w});
    auto it = std::copy(x_t.values().begin(), x_t.values().end(), out.values().begin());
    it = std::copy(z_c.values().begin(), z_c.values().end(), it);
    std::copy(mask.values().begin(), mask.values().end(), it);
    return out;
}

}  // namespace physpref
