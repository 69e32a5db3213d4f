// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/tensor.hpp"

#include <cmath>

#include "physpref/error.hpp"

namespace physpref {

std::string_view to_string(Semantics s) noexcept {
    switch (s) {
        case Semantics::Untagged: return "untagged";
        case Semantics::Clean: return "clean";
        case Semantics::Noise: return "noise";
        case Semantics::Interpolant: return "interpolant";
        case Semantics::Velocity: return "velocity";
        case Semantics::Prediction: return "prediction";
        case Semantics::Condition: return "condition";
        case Semantics::Mask: return "mask";
        case Semantics::Pixels: return "pixels";
    }
    return "untagged";
}

std::string Shape4::str() const {
    return "(" + std::to_string(c) + ", " + std::to_string(t) + ", " + std::to_string(h) + ", " +
           std::to_string(w) + ")";
}

Tensor4::Tensor4(Shape4 shape, Semantics tag, double fill) : shape_(shape), tag_(tag) {
    if (shape.c < 0 || shape.t < 0 || shape.h < 0 || shape.w < 0) {
        throw ValidationError("negative tensor extent " + shape.str());
    }
    data_.assign(shape.size(), fill);
}

bool Tensor4::all_finite() const noexcept {
    for (const double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double Tensor4::sum() const noexcept {
    double s = 0.0;
    for (const double v : data_) s += v;
    return s;
}

void require_same_shape(const Tensor4& a, const Tensor4& b, std::string_view what) {
    if (!(a.shape() == b.shape())) {
        throw ValidationError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                              b.shape().str());
    }
}

void require_finite(const Tensor4& x, std::string_view what) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) {
            throw NumericalError(std::string(what) + ": non-finite value at flat index " + std::to_string(i));
        }
    }
}

Tensor4 axpby(double a, const Tensor4& x, double b, const Tensor4& y, Semantics tag) {
    require_same_shape(x, y, "axpby");
    Tensor4 out(x.shape(), tag);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x[i] + b * y[i];
    return out;
}

double mean_squared_error(const Tensor4& a, const Tensor4& b) {
    require_same_shape(a, b, "mean_squared_error");
    if (a.size() == 0) {
        throw ValidationError("mean_squared_error of empty tensors");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

}  // namespace physpref
