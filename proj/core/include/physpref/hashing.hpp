// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace physpref {

/// Lowercase hex SHA-256 of a byte buffer.
std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(std::string_view text);

/// SHA-256 over the exact bytes of a file. Throws IoError if the file
/// exists but cannot be read.
std::string sha256_file(const std::filesystem::path& path);

bool is_sha256_hex(std::string_view text) noexcept;

}  // namespace physpref
