// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace physpref {

using Json = nlohmann::json;

std::string read_text_file(const std::filesystem::path& path);

/// Writes to `<path>.tmp` then renames over `path`, creating parent dirs.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

struct JsonLine {
    std::size_t line;  // 1-based
    Json value;
};

/// Parses line-delimited JSON objects. Blank lines are skipped; any other
/// line that is not a JSON object raises ParseError naming the line.
std::vector<JsonLine> parse_jsonl(std::string_view text, const std::string& source);
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path);

/// One compact JSON object per line, LF terminated.
std::string to_jsonl(const std::vector<Json>& rows);

/// Rejects keys outside `allowed` and missing keys from `required`.
void check_fields(const Json& object,
                  std::initializer_list<std::string_view> allowed,
                  std::initializer_list<std::string_view> required,
                  const std::string& source, std::size_t line);

/// Fixed-point text with two decimals ("12.50"), locale independent.
std::string fixed2(double value);

/// Shortest round-trip decimal text for a double, locale independent.
std::string shortest_decimal(double value);

}  // namespace physpref
