// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/denoiser.hpp"

#include <cmath>

#include "physpref/error.hpp"

namespace physpref {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using MapM = Eigen::Map<Mat>;
using CMapM = Eigen::Map<const Mat>;

Json DenoiserConfig::to_json() const {
    return {{"channels", channels},     {"mask_stride", mask_stride}, {"frames", frames},
            {"height", height},         {"width", width},             {"hidden", hidden},
            {"ff_hidden", ff_hidden},   {"blocks", blocks},           {"time_dim", time_dim},
            {"text_dim", text_dim},     {"feature_dim", feature_dim}, {"ctx_hidden", ctx_hidden},
            {"ctx_dim", ctx_dim},       {"adapter_rank", adapter_rank},
            {"adapter_alpha", adapter_alpha}};
}

DenoiserConfig DenoiserConfig::from_json(const Json& j) {
    DenoiserConfig c;
    c.channels = j.value("channels", c.channels);
    c.mask_stride = j.value("mask_stride", c.mask_stride);
    c.frames = j.value("frames", c.frames);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.hidden = j.value("hidden", c.hidden);
    c.ff_hidden = j.value("ff_hidden", c.ff_hidden);
    c.blocks = j.value("blocks", c.blocks);
    c.time_dim = j.value("time_dim", c.time_dim);
    c.text_dim = j.value("text_dim", c.text_dim);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.ctx_hidden = j.value("ctx_hidden", c.ctx_hidden);
    c.ctx_dim = j.value("ctx_dim", c.ctx_dim);
    c.adapter_rank = j.value("adapter_rank", c.adapter_rank);
    c.adapter_alpha = j.value("adapter_alpha", c.adapter_alpha);
    for (const int v : {c.channels, c.mask_stride, c.frames, c.height, c.width, c.hidden, c.ff_hidden,
                        c.time_dim, c.text_dim, c.feature_dim, c.ctx_hidden, c.ctx_dim, c.adapter_rank}) {
        if (v < 1) throw ValidationError("denoiser config extents must be positive");
    }
    if (c.blocks < 0 || c.time_dim % 2 != 0) {
        throw ValidationError("denoiser config: blocks must be >= 0 and time_dim even");
    }
    return c;
}

std::size_t ParamLayout::add(const std::string& name, int rows, int cols, ParamGroup group) {
    for (const auto& b : blocks_) {
        if (b.name == name) throw ValidationError("duplicate parameter block " + name);
    }
    blocks_.push_back({name, rows, cols, total_, group});
    total_ += blocks_.back().size();
    return blocks_.size() - 1;
}

const ParamBlock& ParamLayout::at(const std::string& name) const {
    for (const auto& b : blocks_) {
        if (b.name == name) return b;
    }
    throw ValidationError("no parameter block named " + name);
}

Vec ParamLayout::group_mask(ParamGroup group) const {
    Vec m = Vec::Zero(static_cast<Eigen::Index>(total_));
    for (const auto& b : blocks_) {
        if (b.group == group) {
            m.segment(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.size())).setOnes();
        }
    }
    return m;
}

void Gradients::zero() {
    base.setZero();
    adapter.setZero();
}

namespace {

const char* const kAdapted[6] = {"wq", "wk", "wv", "wo", "w1", "w2"};

std::string block_name(int l, const char* what) { return "block" + std::to_string(l) + "." + what; }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <typename D>
Mat silu(const Eigen::MatrixBase<D>& x) {
    return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

template <typename D>
Mat silu_grad(const Eigen::MatrixBase<D>& x) {
    return x.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
    });
}

Vec time_embedding(double tau, int dim) {
    Vec e(dim);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        const double arg = 1000.0 * tau * freq;
        e(2 * i) = std::sin(arg);
        e(2 * i + 1) = std::cos(arg);
    }
    return e;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

ToyDenoiser::ToyDenoiser(const DenoiserConfig& config, std::uint64_t seed) : config_(config) {
    build_layout();
    initialize(seed);
}

void ToyDenoiser::build_layout() {
    const auto& c = config_;
    const int d = c.hidden;
    layout_.add("in_w", d, c.input_width());
    layout_.add("in_b", d, 1);
    layout_.add("pos", c.frames, d);
    layout_.add("time_w", d, c.time_dim);
    layout_.add("text_w", d, c.text_dim);
    layout_.add("ctx1_w", c.ctx_hidden, c.feature_dim, ParamGroup::ContextMlp);
    layout_.add("ctx1_b", c.ctx_hidden, 1, ParamGroup::ContextMlp);
    layout_.add("ctx2_w", c.ctx_hidden, c.ctx_hidden, ParamGroup::ContextMlp);
    layout_.add("ctx2_b", c.ctx_hidden, 1, ParamGroup::ContextMlp);
    layout_.add("ctx3_w", c.ctx_dim, c.ctx_hidden, ParamGroup::ContextMlp);
    layout_.add("ctx3_b", c.ctx_dim, 1, ParamGroup::ContextMlp);
    std::vector<std::pair<std::string, std::pair<int, int>>> adapted;
    for (int l = 0; l < c.blocks; ++l) {
        layout_.add(block_name(l, "gate_w"), d, c.ctx_dim);
        layout_.add(block_name(l, "gate"), d, 1);
        for (const char* w : {"wq", "wk", "wv", "wo"}) layout_.add(block_name(l, w), d, d);
        layout_.add(block_name(l, "w1"), c.ff_hidden, d);
        layout_.add(block_name(l, "b1"), c.ff_hidden, 1);
        layout_.add(block_name(l, "w2"), d, c.ff_hidden);
        layout_.add(block_name(l, "b2"), d, 1);
        for (const char* w : kAdapted) {
            const auto& pb = layout_.at(block_name(l, w));
            adapted.push_back({pb.name, {pb.rows, pb.cols}});
        }
    }
    layout_.add("out_w", c.output_width(), d);
    layout_.add("out_b", c.output_width(), 1);
    layout_.add("skip_x", c.channels, 1);
    layout_.add("skip_tx", c.channels, 1);
    layout_.add("skip_z", c.channels, 1);

    adapter_ = AdapterIncrement(adapted, c.adapter_rank, c.adapter_alpha);
    adapter_index_.clear();
    for (int l = 0; l < c.blocks; ++l) {
        std::array<std::size_t, 6> idx{};
        for (int i = 0; i < 6; ++i) idx[static_cast<std::size_t>(i)] = static_cast<std::size_t>(l * 6 + i);
        adapter_index_.push_back(idx);
    }
}

void ToyDenoiser::initialize(std::uint64_t seed) {
    theta_ = Vec::Zero(static_cast<Eigen::Index>(layout_.total()));
    SplitMix64 rng(derive_seed(seed, "denoiser:theta"));
    for (const auto& b : layout_.blocks()) {
        auto m = param(b.name);
        const bool bias = b.cols == 1;
        if (b.name == "skip_x") {
            m.setConstant(-1.0);
        } else if (b.name == "skip_z") {
            m.setConstant(1.0);
        } else if (b.name.ends_with(".gate")) {
            m.setConstant(0.1);
        } else if (bias || b.name == "skip_tx") {
            m.setZero();
        } else {
            double stddev = 1.0 / std::sqrt(static_cast<double>(b.cols));
            if (b.name == "pos") stddev = 0.02;
            if (b.name == "out_w") stddev *= 0.1;
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.normal() * stddev;
            }
        }
    }
    SplitMix64 arng(derive_seed(seed, "denoiser:adapter"));
    adapter_.initialize(arng);
}

MapM ToyDenoiser::param(const std::string& name) {
    const auto& b = layout_.at(name);
    return {theta_.data() + b.offset, b.rows, b.cols};
}

CMapM ToyDenoiser::param(const std::string& name) const {
    const auto& b = layout_.at(name);
    return {theta_.data() + b.offset, b.rows, b.cols};
}

Gradients ToyDenoiser::make_gradients() const {
    Gradients g;
    g.base = Vec::Zero(theta_.size());
    g.adapter = Vec::Zero(adapter_.factors().size());
    return g;
}

Vec ToyDenoiser::global_context(const std::vector<double>& features) const {
    if (static_cast<int>(features.size()) != config_.feature_dim) {
        throw ValidationError("context features have " + std::to_string(features.size()) + " values, expected " +
                              std::to_string(config_.feature_dim));
    }
    const Vec feat = to_vec(features);
    const Vec h1 = silu(param("ctx1_w") * feat + param("ctx1_b"));
    const Vec h2 = silu(param("ctx2_w") * h1 + param("ctx2_b"));
    return param("ctx3_w") * h2 + param("ctx3_b");
}

Tensor4 ToyDenoiser::forward(const Tensor4& x_t, const ConditioningPack& cond, double tau, ForwardTape* tape) const {
    const auto& c = config_;
    const Shape4 ls = c.latent_shape();
    if (!(x_t.shape() == ls)) {
        throw ValidationError("denoiser expects latent " + ls.str() + ", got " + x_t.shape().str());
    }
    const Tensor4 input = assemble_input(x_t, cond.z_c, cond.mask);
    if (input.shape().c != 2 * c.channels + c.mask_stride) {
        throw ValidationError("denoiser expects " + std::to_string(c.mask_stride) + " mask channels, got " +
                              std::to_string(cond.mask.shape().c));
    }
    const int n = c.frames;
    const int hw = c.height * c.width;
    const int d = c.hidden;

    ForwardTape local;
    ForwardTape& tp = tape ? *tape : local;
    tp.x.resize(n, c.input_width());
    for (int ch = 0; ch < input.shape().c; ++ch) {
        for (int k = 0; k < n; ++k) {
            const double* src = input.data() + input.index(ch, k, 0, 0);
            for (int p = 0; p < hw; ++p) tp.x(k, ch * hw + p) = src[p];
        }
    }
    tp.temb = time_embedding(tau, c.time_dim);
    tp.text = to_vec(cond.pooled_text());
    if (tp.text.size() != c.text_dim) {
        throw ValidationError("text embedding width mismatch");
    }
    tp.feat = to_vec(cond.ctx_features);
    if (tp.feat.size() != c.feature_dim) {
        throw ValidationError("context features have " + std::to_string(tp.feat.size()) + " values, expected " +
                              std::to_string(c.feature_dim));
    }
    tp.a1 = param("ctx1_w") * tp.feat + param("ctx1_b");
    tp.h1 = silu(tp.a1);
    tp.a2 = param("ctx2_w") * tp.h1 + param("ctx2_b");
    tp.h2 = silu(tp.a2);
    tp.g = param("ctx3_w") * tp.h2 + param("ctx3_b");

    const double s = adapter_.scale();
    const auto lin = [&](const Mat& X, const std::string& wname, std::size_t ai) -> Mat {
        Mat Y = X * param(wname).transpose();
        if (s != 0.0) {
            Y.noalias() += s * ((X * adapter_.B(ai).transpose()) * adapter_.A(ai).transpose());
        }
        return Y;
    };

    const Vec e = param("in_b") + param("time_w") * tp.temb + param("text_w") * tp.text;
    Mat H = tp.x * param("in_w").transpose() + param("pos");
    H.rowwise() += e.transpose();

    tp.blocks.resize(static_cast<std::size_t>(c.blocks));
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    for (int l = 0; l < c.blocks; ++l) {
        auto& bt = tp.blocks[static_cast<std::size_t>(l)];
        const auto& ai = adapter_index_[static_cast<std::size_t>(l)];
        bt.h_in = H;
        bt.gate_in = param(block_name(l, "gate_w")) * tp.g;
        const Vec inject = param(block_name(l, "gate")).col(0).cwiseProduct(bt.gate_in);
        H.rowwise() += inject.transpose();
        bt.h_attn = H;
        bt.q = lin(H, block_name(l, "wq"), ai[0]);
        bt.k = lin(H, block_name(l, "wk"), ai[1]);
        bt.v = lin(H, block_name(l, "wv"), ai[2]);
        Mat S = (bt.q * bt.k.transpose()) * inv_sqrt_d;
        for (Eigen::Index r = 0; r < S.rows(); ++r) {
            const double mx = S.row(r).maxCoeff();
            S.row(r) = (S.row(r).array() - mx).exp();
            S.row(r) /= S.row(r).sum();
        }
        bt.attn = std::move(S);
        bt.z = bt.attn * bt.v;
        H += lin(bt.z, block_name(l, "wo"), ai[3]);
        bt.h_ff = H;
        bt.f1 = lin(H, block_name(l, "w1"), ai[4]);
        bt.f1.rowwise() += param(block_name(l, "b1")).col(0).transpose();
        bt.fs = silu(bt.f1);
        Mat f2 = lin(bt.fs, block_name(l, "w2"), ai[5]);
        f2.rowwise() += param(block_name(l, "b2")).col(0).transpose();
        H += f2;
    }
    tp.h_out = H;
    Mat Y = H * param("out_w").transpose();
    Y.rowwise() += param("out_b").col(0).transpose();

    Tensor4 u(ls, Semantics::Prediction);
    const auto skip_x = param("skip_x");
    const auto skip_tx = param("skip_tx");
    const auto skip_z = param("skip_z");
    for (int ch = 0; ch < c.channels; ++ch) {
        const double a = skip_x(ch, 0) + skip_tx(ch, 0) * tau;
        const double b = skip_z(ch, 0);
        for (int k = 0; k < n; ++k) {
            const std::size_t base = u.index(ch, k, 0, 0);
            for (int p = 0; p < hw; ++p) {
                u[base + static_cast<std::size_t>(p)] = Y(k, ch * hw + p) + a * x_t[base + static_cast<std::size_t>(p)] +
                                                       b * cond.z_c[base + static_cast<std::size_t>(p)];
            }
        }
    }
    if (!u.all_finite()) {
        throw NumericalError("denoiser produced a non-finite output at tau=" + shortest_decimal(tau));
    }
    if (tape) {
        tp.x_t = x_t;
        tp.z_c = cond.z_c;
        tp.tau = tau;
    }
    return u;
}

void ToyDenoiser::backward(const ForwardTape& tp, const Tensor4& du, const GradTargets& targets,
                           Gradients& grads) const {
    const auto& c = config_;
    if (!(du.shape() == c.latent_shape())) {
        throw ValidationError("backward: gradient shape " + du.shape().str() + " does not match the latent");
    }
    if (grads.base.size() != theta_.size() || grads.adapter.size() != adapter_.factors().size()) {
        throw ValidationError("backward: gradient buffers do not match the parameter layout");
    }
    const int n = c.frames;
    const int hw = c.height * c.width;
    const int d = c.hidden;
    const bool want_base = targets.base;
    const bool want_adapter = targets.adapter && adapter_.scale() != 0.0;
    const double s = adapter_.scale();

    const auto gparam = [&](const std::string& name) -> MapM {
        const auto& b = layout_.at(name);
        return {grads.base.data() + b.offset, b.rows, b.cols};
    };
    const auto gA = [&](std::size_t i) -> MapM {
        const auto& am = adapter_.matrices()[i];
        return {grads.adapter.data() + am.a_offset, am.m, adapter_.rank()};
    };
    const auto gB = [&](std::size_t i) -> MapM {
        const auto& am = adapter_.matrices()[i];
        return {grads.adapter.data() + am.b_offset, adapter_.rank(), am.n};
    };
    // dX += dY W_eff, plus weight and factor gradients as requested.
    const auto lin_back = [&](const Mat& X, const Mat& dY, const std::string& wname, std::size_t ai, Mat& dX) {
        const auto W = param(wname);
        if (want_base) gparam(wname).noalias() += dY.transpose() * X;
        dX.noalias() += dY * W;
        if (s != 0.0) {
            const auto A = adapter_.A(ai);
            const auto B = adapter_.B(ai);
            if (want_adapter) {
                const Mat XB = X * B.transpose();
                gA(ai).noalias() += s * (dY.transpose() * XB);
                gB(ai).noalias() += s * ((A.transpose() * dY.transpose()) * X);
            }
            dX.noalias() += s * ((dY * A) * B);
        }
    };

    Mat dY(n, c.output_width());
    for (int ch = 0; ch < c.channels; ++ch) {
        double sx = 0.0, sz = 0.0;
        for (int k = 0; k < n; ++k) {
            const std::size_t base = du.index(ch, k, 0, 0);
            for (int p = 0; p < hw; ++p) {
                const double g = du[base + static_cast<std::size_t>(p)];
                dY(k, ch * hw + p) = g;
                sx += g * tp.x_t[base + static_cast<std::size_t>(p)];
                sz += g * tp.z_c[base + static_cast<std::size_t>(p)];
            }
        }
        if (want_base) {
            gparam("skip_x")(ch, 0) += sx;
            gparam("skip_tx")(ch, 0) += sx * tp.tau;
            gparam("skip_z")(ch, 0) += sz;
        }
    }
    if (want_base) {
        gparam("out_w").noalias() += dY.transpose() * tp.h_out;
        gparam("out_b").col(0) += dY.colwise().sum().transpose();
    }
    Mat dH = dY * param("out_w");
    Vec dg = Vec::Zero(c.ctx_dim);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

    for (int l = c.blocks - 1; l >= 0; --l) {
        const auto& bt = tp.blocks[static_cast<std::size_t>(l)];
        const auto& ai = adapter_index_[static_cast<std::size_t>(l)];

        // Feed-forward: H_out = H_ff + W2 silu(W1 H_ff + b1) + b2.
        const Mat dF2 = dH;
        if (want_base) gparam(block_name(l, "b2")).col(0) += dF2.colwise().sum().transpose();
        Mat dFs = Mat::Zero(n, c.ff_hidden);
        lin_back(bt.fs, dF2, block_name(l, "w2"), ai[5], dFs);
        const Mat dF1 = dFs.cwiseProduct(silu_grad(bt.f1));
        if (want_base) gparam(block_name(l, "b1")).col(0) += dF1.colwise().sum().transpose();
        lin_back(bt.h_ff, dF1, block_name(l, "w1"), ai[4], dH);

        // Attention: H_ff = H_attn + Wo softmax(Q K^T / sqrt(d)) V.
        Mat dZ = Mat::Zero(n, d);
        lin_back(bt.z, dH, block_name(l, "wo"), ai[3], dZ);
        const Mat dA = dZ * bt.v.transpose();
        const Mat dV = bt.attn.transpose() * dZ;
        Mat dS = bt.attn.cwiseProduct(dA);
        const Vec rows = dS.rowwise().sum();
        dS = (bt.attn.cwiseProduct(dA.colwise() - rows)) * inv_sqrt_d;
        const Mat dQ = dS * bt.k;
        const Mat dK = dS.transpose() * bt.q;
        lin_back(bt.h_attn, dQ, block_name(l, "wq"), ai[0], dH);
        lin_back(bt.h_attn, dK, block_name(l, "wk"), ai[1], dH);
        lin_back(bt.h_attn, dV, block_name(l, "wv"), ai[2], dH);

        // Gated context injection: H_attn = H_in + 1 (gate * W_gate g)^T.
        const Vec col = dH.colwise().sum().transpose();
        const auto gate = param(block_name(l, "gate")).col(0);
        const Vec dm = col.cwiseProduct(gate);
        if (want_base) {
            gparam(block_name(l, "gate")).col(0) += col.cwiseProduct(bt.gate_in);
            gparam(block_name(l, "gate_w")).noalias() += dm * tp.g.transpose();
        }
        dg.noalias() += param(block_name(l, "gate_w")).transpose() * dm;
    }

    if (want_base) {
        const Vec de = dH.colwise().sum().transpose();
        gparam("in_w").noalias() += dH.transpose() * tp.x;
        gparam("in_b").col(0) += de;
        gparam("pos") += dH;
        gparam("time_w").noalias() += de * tp.temb.transpose();
        gparam("text_w").noalias() += de * tp.text.transpose();
    }
    if (targets.context_mlp) {
        gparam("ctx3_w").noalias() += dg * tp.h2.transpose();
        gparam("ctx3_b").col(0) += dg;
        const Vec da2 = (param("ctx3_w").transpose() * dg).cwiseProduct(silu_grad(tp.a2));
        gparam("ctx2_w").noalias() += da2 * tp.h1.transpose();
        gparam("ctx2_b").col(0) += da2;
        const Vec da1 = (param("ctx2_w").transpose() * da2).cwiseProduct(silu_grad(tp.a1));
        gparam("ctx1_w").noalias() += da1 * tp.feat.transpose();
        gparam("ctx1_b").col(0) += da1;
    }
}

double fm_loss(const Tensor4& u, const Tensor4& v_target) {
    const double l = mean_squared_error(u, v_target);
    if (!std::isfinite(l)) {
        throw NumericalError("flow-matching loss is not finite");
    }
    return l;
}

double fm_loss(const ToyDenoiser& model, const Tensor4& x_t, const ConditioningPack& cond, double tau,
               const Tensor4& v_target) {
    return fm_loss(model.forward(x_t, cond, tau), v_target);
}

double fm_loss_and_grad(const ToyDenoiser& model, const Tensor4& x_t, const ConditioningPack& cond, double tau,
                        const Tensor4& v_target, const GradTargets& targets, Gradients& grads, double weight) {
    ForwardTape tape;
    const Tensor4 u = model.forward(x_t, cond, tau, &tape);
    const double loss = fm_loss(u, v_target);
    Tensor4 du(u.shape());
    const double k = 2.0 * weight / static_cast<double>(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) du[i] = k * (u[i] - v_target[i]);
    model.backward(tape, du, targets, grads);
    return loss;
}

}  // namespace physpref
