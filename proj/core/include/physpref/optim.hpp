// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "physpref/io.hpp"

namespace physpref {

struct AdamWConfig {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    Json to_json() const;
    static AdamWConfig from_json(const Json& j, const AdamWConfig& defaults);
    static AdamWConfig from_json(const Json& j);
};

/// Adam with decoupled weight decay. Coordinates where `mask` is zero are
/// left untouched, moments included.
class AdamW {
public:
    AdamW() = default;
    AdamW(Eigen::Index size, const AdamWConfig& config);

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, const Eigen::VectorXd* mask = nullptr);

    std::int64_t steps() const noexcept { return t_; }
    const AdamWConfig& config() const noexcept { return config_; }
    const Eigen::VectorXd& first_moment() const noexcept { return m_; }
    const Eigen::VectorXd& second_moment() const noexcept { return v_; }

private:
    AdamWConfig config_;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
    std::int64_t t_ = 0;
};

}  // namespace physpref
