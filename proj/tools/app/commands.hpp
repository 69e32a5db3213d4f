// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "physpref/conditioning.hpp"
#include "physpref/dpo.hpp"
#include "physpref/fm_trainer.hpp"
#include "physpref/pipeline.hpp"
#include "physpref/tensor_store.hpp"
#include "run_context.hpp"

namespace physpref::app {

// Each returns the process exit status.
int cmd_toygen(const RunConfig& config);
int cmd_curate(const RunConfig& config);
int cmd_pipeline(const RunConfig& config, const std::vector<std::string>& stages);
int cmd_train_fm(const RunConfig& config);
int cmd_train_dpo(const RunConfig& config);
int cmd_sweep_beta(const RunConfig& config);
int cmd_evaluate(const RunConfig& config);
int cmd_verify(const RunConfig& config);

struct PromptInfo {
    std::string prompt_id;
    std::string text;
    std::string law;
    std::string event_class;
};

std::map<std::string, PromptInfo> read_prompts(const fs::path& path);

/// Latents and conditioning written by toygen: "x1/<video>", "zc/<prompt>",
/// "feat/<prompt>" and one shared "mask".
class LatentStore {
public:
    explicit LatentStore(const fs::path& path);

    const Tensor4& latent(const std::string& video_id) const;
    ConditioningPack conditioning(const PromptInfo& prompt) const;

private:
    const Tensor4& get(const std::string& key) const;
    fs::path path_;
    TensorMap tensors_;
};

std::vector<DpoExample> dpo_examples(std::span<const PreferencePair> pairs, const LatentStore& store,
                                     const std::map<std::string, PromptInfo>& prompts);

std::vector<PreferencePair> read_stage_pairs(const RunConfig& config, std::string_view stage,
                                             std::string_view artifact);

}  // namespace physpref::app
