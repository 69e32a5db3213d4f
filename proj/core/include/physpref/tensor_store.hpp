// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "physpref/tensor.hpp"

namespace physpref {

/// Named tensors in one little-endian binary file.
///
/// Layout: magic "PPTENS01", u64 entry count, then per entry in name order:
/// u32 name length, name bytes, u8 semantics tag, four u32 extents (c, t,
/// h, w) and c*t*h*w f64 values. Identical maps serialize to identical bytes.
using TensorMap = std::map<std::string, Tensor4>;

std::string serialize_tensors(const TensorMap& tensors);
TensorMap parse_tensors(std::string_view bytes, const std::string& source = "tensor store");

void write_tensors(const std::filesystem::path& path, const TensorMap& tensors);
TensorMap read_tensors(const std::filesystem::path& path);

/// Raw bytes of the values, for content digests.
std::string_view tensor_bytes(const Tensor4& t) noexcept;

}  // namespace physpref
