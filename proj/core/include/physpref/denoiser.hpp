// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "physpref/adapter.hpp"
#include "physpref/conditioning.hpp"
#include "physpref/io.hpp"
#include "physpref/tensor.hpp"

namespace physpref {

struct DenoiserConfig {
    int channels = 16;     // latent c
    int mask_stride = 4;   // s
    int frames = 13;       // latent t (one token per latent frame)
    int height = 8;
    int width = 8;
    int hidden = 64;       // token width d
    int ff_hidden = 128;
    int blocks = 2;
    int time_dim = 16;
    int text_dim = kTextEmbeddingDim;
    int feature_dim = 48;  // context_features of a 3-channel frame
    int ctx_hidden = 64;
    int ctx_dim = 64;
    int adapter_rank = 16;
    double adapter_alpha = 16.0;

    int input_width() const { return (2 * channels + mask_stride) * height * width; }
    int output_width() const { return channels * height * width; }
    Shape4 latent_shape() const { return {channels, frames, height, width}; }

    Json to_json() const;
    static DenoiserConfig from_json(const Json& j);
};

enum class ParamGroup { Base, ContextMlp };

struct ParamBlock {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;
    ParamGroup group = ParamGroup::Base;

    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Named views into the flat parameter vector theta.
class ParamLayout {
public:
    std::size_t add(const std::string& name, int rows, int cols, ParamGroup group = ParamGroup::Base);
    const ParamBlock& at(const std::string& name) const;
    const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
    std::size_t total() const noexcept { return total_; }

    /// 1 where the coordinate belongs to `group`, else 0.
    Eigen::VectorXd group_mask(ParamGroup group) const;

private:
    std::vector<ParamBlock> blocks_;
    std::size_t total_ = 0;
};

struct GradTargets {
    bool base = true;         // theta outside the context MLP
    bool context_mlp = true;  // theta inside the context MLP
    bool adapter = false;     // phi
};

struct Gradients {
    Eigen::VectorXd base;
    Eigen::VectorXd adapter;

    void zero();
};

/// Intermediate activations kept for the backward pass.
struct ForwardTape {
    struct Block {
        Eigen::MatrixXd h_in;     // before context injection
        Eigen::VectorXd gate_in;  // W_gate g
        Eigen::MatrixXd h_attn;   // attention input
        Eigen::MatrixXd q, k, v, attn, z;
        Eigen::MatrixXd h_ff;     // feed-forward input
        Eigen::MatrixXd f1, fs;
    };
    Eigen::MatrixXd x;  // tokens x input features
    Eigen::VectorXd temb, text, feat;
    Eigen::VectorXd a1, h1, a2, h2, g;
    std::vector<Block> blocks;
    Eigen::MatrixXd h_out;
    Tensor4 x_t;
    Tensor4 z_c;
    double tau = 0.0;
};

/// Small transformer-style velocity model over per-latent-frame tokens.
///
/// Token k is latent frame k of [x_t | z_c | mask] flattened channel-major.
/// The token stream gets a linear input projection plus a learned position
/// row, a sinusoidal timestep embedding and the pooled text embedding. A
/// 3-layer SiLU MLP maps context features to g, which each block adds through
/// its own gated projection. Blocks are single-head softmax attention and a
/// SiLU feed-forward, both residual. The output head is linear with a
/// per-channel skip: u += skip_x * x_t + skip_tx * tau * x_t + skip_z * z_c.
/// The adapter covers wq, wk, wv, wo, w1 and w2 of every block.
class ToyDenoiser {
public:
    ToyDenoiser() = default;
    ToyDenoiser(const DenoiserConfig& config, std::uint64_t seed);

    const DenoiserConfig& config() const noexcept { return config_; }
    const ParamLayout& layout() const noexcept { return layout_; }

    Eigen::VectorXd& theta() noexcept { return theta_; }
    const Eigen::VectorXd& theta() const noexcept { return theta_; }
    AdapterIncrement& adapter() noexcept { return adapter_; }
    const AdapterIncrement& adapter() const noexcept { return adapter_; }

    Eigen::Map<Eigen::MatrixXd> param(const std::string& name);
    Eigen::Map<const Eigen::MatrixXd> param(const std::string& name) const;

    /// u(x_t, cond, tau). Throws NumericalError on a non-finite output.
    Tensor4 forward(const Tensor4& x_t, const ConditioningPack& cond, double tau,
                    ForwardTape* tape = nullptr) const;

    /// Accumulates dL/dparams into `grads` given dL/du.
    void backward(const ForwardTape& tape, const Tensor4& du, const GradTargets& targets,
                  Gradients& grads) const;

    /// The context MLP output g for a feature vector.
    Eigen::VectorXd global_context(const std::vector<double>& features) const;

    Gradients make_gradients() const;

private:
    void build_layout();
    void initialize(std::uint64_t seed);

    DenoiserConfig config_;
    ParamLayout layout_;
    Eigen::VectorXd theta_;
    AdapterIncrement adapter_;
    std::vector<std::array<std::size_t, 6>> adapter_index_;  // wq wk wv wo w1 w2 per block
};

/// Mean squared error between a velocity prediction and its target.
double fm_loss(const Tensor4& u, const Tensor4& v_target);

/// fm_loss of the model output.
double fm_loss(const ToyDenoiser& model, const Tensor4& x_t, const ConditioningPack& cond, double tau,
               const Tensor4& v_target);

/// Adds weight * dL/dparams into `grads` and returns the loss.
double fm_loss_and_grad(const ToyDenoiser& model, const Tensor4& x_t, const ConditioningPack& cond, double tau,
                        const Tensor4& v_target, const GradTargets& targets, Gradients& grads,
                        double weight = 1.0);

}  // namespace physpref
