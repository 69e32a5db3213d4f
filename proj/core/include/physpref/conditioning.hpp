// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "physpref/tensor.hpp"

namespace physpref {

/// Fixed linear stand-in for a video VAE.
///
/// Encoding keeps frame 0 alone and averages each following group of four
/// frames, average-pools 8x8 pixel blocks, then lifts the 3 pixel channels
/// to 16 latent channels with `lift_matrix()`. Output shape is
/// (16, 1 + (T-1)/4, H/8, W/8).
struct ToyCodec {
    static constexpr int kLatentChannels = 16;
    static constexpr int kTemporalStride = 4;
    static constexpr int kSpatialStride = 8;

    /// 16x3 row-major. Rows 0-2 are the identity; row k >= 3 holds
    /// 0.5 * cos(pi * (k - 2) * (2c + 1) / 6) for pixel channel c.
    static const std::array<double, 48>& lift_matrix();

    static Shape4 latent_shape(const Shape4& pixels);
    static Tensor4 encode(const Tensor4& pixels);

    /// Approximate inverse for inspection: latent channels 0-2, nearest
    /// upsampling in space and time. Frame count is 1 + 4 * (t - 1).
    static Tensor4 decode(const Tensor4& latent);
};

/// Zero-pads (C, R, H, W) conditioning frames to T frames and encodes them.
/// Requires (T-1) % 4 == 0, (R-1) % 4 == 0, 1 <= R <= T, H and W divisible by 8.
Tensor4 build_condition_latent(const Tensor4& frames, int T);

/// Binary mask (s, t, h, w) marking retained frames. The length-T frame
/// mask has ones for the first R frames; its first entry fills all s slots
/// of latent frame 0, and entries 1..T-1 fill latent frames 1..t-1 column
/// by column (slot j of latent frame k holds frame 1 + (k-1)*s + j).
Tensor4 build_mask(int R, int T, int s, int h, int w);

/// Toy image features of the final frame: mean over a 4x4 grid of cells
/// per channel, channel-major (C * 16 values).
std::vector<double> context_features(const Tensor4& frames);

inline constexpr int kTextEmbeddingDim = 16;

/// Fixed per-word embedding vectors drawn from SplitMix64(fnv1a64(word)).
std::vector<std::vector<double>> text_embedding(std::string_view prompt);

/// Mean of the word vectors; zeros for an empty prompt.
std::vector<double> pooled_text_embedding(std::string_view prompt);

struct ConditioningPack {
    Tensor4 z_c;
    Tensor4 mask;
    std::vector<double> ctx_features;
    std::vector<std::vector<double>> text_ctx;

    std::vector<double> pooled_text() const;
};

/// Condition latent, mask, context features and text context for the first
/// R frames of `frames`, targeting a T-frame clip.
ConditioningPack make_conditioning(const Tensor4& frames, int R, int T, std::string_view prompt, int s = 4);

/// Channel concatenation [x_t (c) | z_c (c) | mask (s)]. Checks tags and
/// extents so a permuted layout fails instead of training silently.
Tensor4 assemble_input(const Tensor4& x_t, const Tensor4& z_c, const Tensor4& mask);

}  // namespace physpref
