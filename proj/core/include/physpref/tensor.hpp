// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace physpref {

/// What a tensor holds. Arithmetic helpers ignore the tag; layout-sensitive
/// entry points (input assembly) check it.
enum class Semantics {
    Untagged,
    Clean,        // x1
    Noise,        // x0
    Interpolant,  // x_t
    Velocity,     // v
    Prediction,   // u
    Condition,    // z_c
    Mask,
    Pixels,
};

std::string_view to_string(Semantics s) noexcept;

struct Shape4 {
    int c = 0;
    int t = 0;
    int h = 0;
    int w = 0;

    std::size_t size() const noexcept {
        return static_cast<std::size_t>(c) * static_cast<std::size_t>(t) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }
    std::size_t frame_size() const noexcept { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
    friend bool operator==(const Shape4&, const Shape4&) = default;
    std::string str() const;
};

/// Dense real tensor laid out (c, t, h, w), row-major.
class Tensor4 {
public:
    Tensor4() = default;
    Tensor4(Shape4 shape, Semantics tag = Semantics::Untagged, double fill = 0.0);

    const Shape4& shape() const noexcept { return shape_; }
    Semantics tag() const noexcept { return tag_; }
    void set_tag(Semantics tag) noexcept { tag_ = tag; }

    std::size_t size() const noexcept { return data_.size(); }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    std::size_t index(int c, int t, int h, int w) const noexcept {
        return ((static_cast<std::size_t>(c) * shape_.t + t) * shape_.h + h) * shape_.w + w;
    }
    double& operator()(int c, int t, int h, int w) noexcept { return data_[index(c, t, h, w)]; }
    double operator()(int c, int t, int h, int w) const noexcept { return data_[index(c, t, h, w)]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    bool all_finite() const noexcept;
    double sum() const noexcept;

private:
    Shape4 shape_;
    Semantics tag_ = Semantics::Untagged;
    std::vector<double> data_;
};

using LatentVideo = Tensor4;

/// Throws ValidationError naming `what` when shapes differ.
void require_same_shape(const Tensor4& a, const Tensor4& b, std::string_view what);

/// Throws NumericalError naming `what` on the first non-finite entry.
void require_finite(const Tensor4& x, std::string_view what);

/// Elementwise a*x + b*y.
Tensor4 axpby(double a, const Tensor4& x, double b, const Tensor4& y, Semantics tag);

/// Mean of (a - b)^2.
double mean_squared_error(const Tensor4& a, const Tensor4& b);

}  // namespace physpref
