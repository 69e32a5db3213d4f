// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/optim.hpp"

#include <cmath>

#include "physpref/error.hpp"

namespace physpref {

Json AdamWConfig::to_json() const {
    return {{"lr", lr}, {"beta1", beta1}, {"beta2", beta2}, {"eps", eps}, {"weight_decay", weight_decay}};
}

AdamWConfig AdamWConfig::from_json(const Json& j, const AdamWConfig& defaults) {
    AdamWConfig c = defaults;
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    if (!(c.lr > 0) || !(c.beta1 >= 0 && c.beta1 < 1) || !(c.beta2 >= 0 && c.beta2 < 1) || !(c.eps > 0) ||
        c.weight_decay < 0) {
        throw ValidationError("invalid optimizer settings");
    }
    return c;
}

AdamWConfig AdamWConfig::from_json(const Json& j) { return from_json(j, AdamWConfig{}); }

AdamW::AdamW(Eigen::Index size, const AdamWConfig& config)
    : config_(config), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void AdamW::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, const Eigen::VectorXd* mask) {
    if (params.size() != m_.size() || grad.size() != m_.size() || (mask && mask->size() != m_.size())) {
        throw ValidationError("AdamW::step: size mismatch");
    }
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        if (mask && (*mask)(i) == 0.0) continue;
        const double g = grad(i);
        m_(i) = b1 * m_(i) + (1.0 - b1) * g;
        v_(i) = b2 * v_(i) + (1.0 - b2) * g * g;
        const double mhat = m_(i) / c1;
        const double vhat = v_(i) / c2;
        params(i) -= config_.lr * config_.weight_decay * params(i);
        params(i) -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
}

}  // namespace physpref
