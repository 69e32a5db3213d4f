// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/manifest.hpp"

#include <algorithm>

#include "physpref/error.hpp"
#include "physpref/hashing.hpp"

namespace physpref {

Json canonicalize(const Json& value) {
    if (value.is_number_float()) {
        return shortest_decimal(value.get<double>());
    }
    if (value.is_object()) {
        Json out = Json::object();
        for (const auto& [key, child] : value.items()) {
            out[key] = canonicalize(child);
        }
        return out;
    }
    if (value.is_array()) {
        Json out = Json::array();
        for (const auto& child : value) {
            out.push_back(canonicalize(child));
        }
        return out;
    }
    return value;
}

namespace {

Json body_json(const StageManifest& m) {
    Json body = Json::object();
    body["stage"] = m.stage;
    body["params"] = canonicalize(m.params);
    body["counts"] = m.counts;
    std::vector<std::string> items = m.items;
    std::sort(items.begin(), items.end());
    body["items"] = items;
    body["extras"] = canonicalize(m.extras);
    return body;
}

}  // namespace

std::string StageManifest::canonical_body() const {
    return body_json(*this).dump(2) + "\n";
}

void StageManifest::seal() {
    std::sort(items.begin(), items.end());
    manifest_sha256 = sha256_hex(canonical_body());
}

bool StageManifest::verify() const {
    return is_sha256_hex(manifest_sha256) && sha256_hex(canonical_body()) == manifest_sha256;
}

std::string StageManifest::serialize() const {
    Json full = body_json(*this);
    full["manifest_sha256"] = manifest_sha256;
    return full.dump(2) + "\n";
}

StageManifest StageManifest::parse(std::string_view text, const std::string& source) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(source, 1, std::string("malformed manifest: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError(source, 1, "manifest must be a JSON object");
    }
    check_fields(doc, {"stage", "params", "counts", "items", "extras", "manifest_sha256"},
                 {"stage", "params", "counts", "items", "manifest_sha256"}, source, 1);
    StageManifest m;
    try {
        m.stage = doc.at("stage").get<std::string>();
        m.params = doc.at("params");
        m.counts = doc.at("counts").get<std::map<std::string, std::int64_t>>();
        m.items = doc.at("items").get<std::vector<std::string>>();
        m.extras = doc.value("extras", Json::object());
        m.manifest_sha256 = doc.at("manifest_sha256").get<std::string>();
    } catch (const Json::exception& e) {
        throw ParseError(source, 1, std::string("bad manifest field: ") + e.what());
    }
    return m;
}

StageManifest StageManifest::read(const std::filesystem::path& path) {
    return parse(read_text_file(path), path.string());
}

void StageManifest::write(const std::filesystem::path& path) const {
    write_file_atomic(path, serialize());
}

}  // namespace physpref
