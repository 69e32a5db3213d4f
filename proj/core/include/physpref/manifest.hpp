// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "physpref/io.hpp"

namespace physpref {

/// Content-addressed record of one pipeline stage.
///
/// Canonical form: JSON with sorted keys, two-space indent, LF newlines,
/// UTF-8, every floating-point value rendered as a string (scores are
/// pre-formatted with fixed2, other reals use the shortest round-trip
/// decimal), items sorted. `manifest_sha256` is the SHA-256 of the
/// canonical form of all other fields.
struct StageManifest {
    std::string stage;
    Json params = Json::object();
    std::map<std::string, std::int64_t> counts;
    std::vector<std::string> items;
    Json extras = Json::object();
    std::string manifest_sha256;

    /// Sorts items and stamps manifest_sha256.
    void seal();

    /// Recomputes the digest and compares it with the stored one.
    bool verify() const;

    std::string canonical_body() const;
    std::string serialize() const;

    static StageManifest parse(std::string_view text, const std::string& source = "manifest");
    static StageManifest read(const std::filesystem::path& path);
    void write(const std::filesystem::path& path) const;
};

/// Replaces every float in `value` by its shortest decimal string.
Json canonicalize(const Json& value);

}  // namespace physpref
