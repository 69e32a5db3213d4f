// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "physpref/conditioning.hpp"
#include "physpref/denoiser.hpp"
#include "physpref/flow.hpp"
#include "physpref/hashing.hpp"
#include "physpref/oracle.hpp"
#include "physpref/pipeline.hpp"
#include "physpref/toyworld.hpp"

using namespace physpref;

namespace {

// One demo-sized sample: a 49-frame 64x64 clip, its latent and conditioning.
struct Sample {
    ToyClip clip;
    Tensor4 latent;
    ConditioningPack cond;
    Tensor4 x_t;
    Tensor4 v;
};

const Sample& sample() {
    static const Sample s = [] {
        Sample out;
        out.clip = gen_clip(sample_params(3), 49, 64, 64, 3);
        out.latent = ToyCodec::encode(out.clip.frames);
        out.cond = make_conditioning(out.clip.frames, kConditioningFrames, 49, "a ball bounces off the wall");
        SplitMix64 rng(4);
        const auto x0 = gaussian_like(out.latent.shape(), rng);
        out.x_t = interpolate(x0, out.latent, 0.05);
        out.v = velocity_target(x0, out.latent);
        return out;
    }();
    return s;
}

void BM_DenoiserForward(benchmark::State& state) {
    const auto& s = sample();
    const ToyDenoiser model(DenoiserConfig{}, 1);
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(s.x_t, s.cond, 0.05));
}
BENCHMARK(BM_DenoiserForward);

void BM_FmLossAndGrad(benchmark::State& state) {
    const auto& s = sample();
    const ToyDenoiser model(DenoiserConfig{}, 1);
    auto grads = model.make_gradients();
    for (auto _ : state) {
        grads.zero();
        benchmark::DoNotOptimize(fm_loss_and_grad(model, s.x_t, s.cond, 0.05, s.v, {true, true, true}, grads));
    }
}
BENCHMARK(BM_FmLossAndGrad);

void BM_GenClip(benchmark::State& state) {
    const auto params = sample_params(5);
    for (auto _ : state) benchmark::DoNotOptimize(gen_clip(params, 49, 64, 64, 5));
}
BENCHMARK(BM_GenClip);

void BM_CodecEncode(benchmark::State& state) {
    const auto& s = sample();
    for (auto _ : state) benchmark::DoNotOptimize(ToyCodec::encode(s.clip.frames));
}
BENCHMARK(BM_CodecEncode);

void BM_LatentOracle(benchmark::State& state) {
    const auto& s = sample();
    for (auto _ : state) benchmark::DoNotOptimize(latent_oracle_residuals(s.latent));
}
BENCHMARK(BM_LatentOracle);

void BM_T1Enumerate(benchmark::State& state) {
    const auto groups = static_cast<int>(state.range(0));
    std::vector<VideoEntry> videos;
    SplitMix64 rng(6);
    for (int g = 0; g < groups; ++g) {
        for (int i = 0; i < 8; ++i) {
            VideoEntry v;
            v.prompt_id = "p" + std::to_string(g);
            v.group_id = v.prompt_id + ":chain";
            v.video_id = v.prompt_id + "-v" + std::to_string(i);
            v.generator_id = "g" + std::to_string(i);
            v.s_score = 3.0 + 12.0 * rng.uniform01();
            v.rater_count = 2 + static_cast<int>(rng.bounded(3));
            videos.push_back(std::move(v));
        }
    }
    for (auto _ : state) benchmark::DoNotOptimize(t1_enumerate_pairs(videos));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(videos.size()));
}
BENCHMARK(BM_T1Enumerate)->Arg(100)->Arg(1000);

void BM_Sha256(benchmark::State& state) {
    const std::string bytes(static_cast<std::size_t>(state.range(0)), 'x');
    for (auto _ : state) benchmark::DoNotOptimize(sha256_hex(bytes));
    state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(1 << 20);

}  // namespace
BENCHMARK_MAIN();
