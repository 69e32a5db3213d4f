// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "physpref/error.hpp"

namespace physpref {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) {
        throw IoError("read failure on " + path.string());
    }
    return std::move(buffer).str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            throw IoError("write failure on " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
    }
}

std::vector<JsonLine> parse_jsonl(std::string_view text, const std::string& source) {
    std::vector<JsonLine> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        ++line_no;
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.find_first_not_of(" \t") == std::string_view::npos) {
            if (end == text.size()) {
                break;
            }
            continue;
        }
        Json value;
        try {
            value = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw ParseError(source, line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!value.is_object()) {
            throw ParseError(source, line_no, "expected a JSON object");
        }
        rows.push_back({line_no, std::move(value)});
        if (end == text.size()) {
            break;
        }
    }
    return rows;
}

std::vector<JsonLine> read_jsonl(const fs::path& path) {
    return parse_jsonl(read_text_file(path), path.string());
}

std::string to_jsonl(const std::vector<Json>& rows) {
    std::string out;
    for (const auto& row : rows) {
        out += row.dump();
        out += '\n';
    }
    return out;
}

void check_fields(const Json& object,
                  std::initializer_list<std::string_view> allowed,
                  std::initializer_list<std::string_view> required,
                  const std::string& source, std::size_t line) {
    for (const auto& [key, value] : object.items()) {
        bool known = false;
        for (const auto name : allowed) {
            known = known || key == name;
        }
        if (!known) {
            throw ParseError(source, line, "unknown field '" + key + "'");
        }
    }
    for (const auto name : required) {
        if (!object.contains(std::string(name))) {
            throw ParseError(source, line, "missing field '" + std::string(name) + "'");
        }
    }
}

std::string fixed2(double value) {
    std::array<char, 64> buffer{};
    const auto result = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value,
                                      std::chars_format::fixed, 2);
    std::string out(buffer.data(), result.ptr);
    if (out == "-0.00") {
        out = "0.00";
    }
    return out;
}

std::string shortest_decimal(double value) {
    std::array<char, 64> buffer{};
    const auto result = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    return std::string(buffer.data(), result.ptr);
}

}  // namespace physpref
