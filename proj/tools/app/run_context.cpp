// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "run_context.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <iostream>

#include "physpref/hashing.hpp"

namespace physpref::app {

namespace {

constexpr std::string_view kStagePrefix = "stage:";

bool valid_name(std::string_view s) {
    if (s.empty() || s == "." || s == "..") return false;
    for (const char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        if (!ok) return false;
    }
    return true;
}

Json parse_value(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const Json::exception&) {
        return Json(std::string(text));
    }
}

}  // namespace

RunConfig RunConfig::load(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
    Json doc;
    try {
        doc = Json::parse(read_text_file(path));
    } catch (const Json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(std::move(doc), path.parent_path());
}

RunConfig RunConfig::from_json(Json doc, fs::path base_dir) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    c.doc_ = std::move(doc);
    c.base_dir_ = std::move(base_dir);
    if (!c.doc_.contains("run_id")) c.doc_["run_id"] = "default";
    if (!c.doc_.contains("output_root")) c.doc_["output_root"] = "runs";
    if (!c.doc_.contains("seed")) c.doc_["seed"] = 0;
    c.run_id();
    c.seed();
    return c;
}

void RunConfig::set(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
    }
    const std::string key(assignment.substr(0, eq));
    Json* node = &doc_;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = parse_value(assignment.substr(eq + 1));
            break;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = Json::object();
        start = dot + 1;
    }
    run_id();
    seed();
}

const std::string& RunConfig::run_id() const {
    const auto& v = doc_.at("run_id");
    if (!v.is_string() || !valid_name(v.get_ref<const std::string&>())) {
        throw ConfigError("config key 'run_id' must be a name of letters, digits, '-', '_' or '.'");
    }
    return v.get_ref<const std::string&>();
}

std::uint64_t RunConfig::seed() const {
    const auto& v = doc_.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ConfigError("config key 'seed' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

fs::path RunConfig::run_dir() const {
    const auto& root = doc_.at("output_root");
    if (!root.is_string()) throw ConfigError("config key 'output_root' must be a string");
    fs::path p(root.get<std::string>());
    if (p.is_relative()) p = base_dir_ / p;
    return p / run_id();
}

Json RunConfig::section(std::string_view name) const {
    const auto it = doc_.find(std::string(name));
    if (it == doc_.end() || it->is_null()) return Json::object();
    if (!it->is_object()) throw ConfigError("config key '" + std::string(name) + "' must be an object");
    return *it;
}

fs::path RunConfig::input_path(std::string_view key) const {
    const std::string full = "paths." + std::string(key);
    const auto paths = section("paths");
    const auto it = paths.find(std::string(key));
    if (it == paths.end() || !it->is_string() || it->get<std::string>().empty()) {
        throw ConfigError("config key '" + full + "' is required");
    }
    const auto value = it->get<std::string>();
    fs::path p;
    if (value.rfind(kStagePrefix, 0) == 0) {
        const auto ref = value.substr(kStagePrefix.size());
        const auto slash = ref.find('/');
        if (slash == std::string::npos) {
            throw ConfigError("config key '" + full + "': stage reference must be stage:<stage>/<artifact>");
        }
        try {
            p = stage_artifact(*this, ref.substr(0, slash), ref.substr(slash + 1));
        } catch (const Error& e) {
            throw ConfigError("config key '" + full + "': " + e.what());
        }
    } else {
        p = value;
        if (p.is_relative()) p = base_dir_ / p;
    }
    if (!fs::exists(p)) throw ConfigError("config key '" + full + "': path does not exist: " + p.string());
    return p;
}

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
    fs::create_directories(run_dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST) {
            throw IoError("run directory is locked by another writer: " + path_.string() +
                          " (remove it if no physpref process is running)");
        }
        throw IoError("cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

StageWriter::StageWriter(const RunConfig& config, std::string stage)
    : config_(config), stage_(std::move(stage)) {
    const auto run = config_.run_dir();
    staging_ = run / (".staging-" + stage_);
    final_ = run / stage_;
    fs::remove_all(staging_);
    fs::create_directories(staging_);
    log_.open(staging_ / "log.txt");
}

StageWriter::~StageWriter() {
    if (committed_) return;
    try {
        log_.close();
        const auto failed = config_.run_dir() / "failed";
        fs::create_directories(failed);
        for (int n = 1;; ++n) {
            const auto target = failed / (stage_ + "-" + std::to_string(n));
            if (!fs::exists(target)) {
                fs::rename(staging_, target);
                quarantined_ = target;
                std::cerr << "partial outputs of stage '" << stage_ << "' moved to " << target.string() << "\n";
                break;
            }
        }
    } catch (...) {
        // Nothing sensible left to do while unwinding.
    }
}

fs::path StageWriter::artifact(const std::string& name, const std::string& ext, std::string_view content) {
    if (artifacts_.contains(name)) throw IntegrityError("artifact '" + name + "' written twice");
    const auto digest = sha256_hex(content);
    const auto file = name + "." + digest.substr(0, 16) + "." + ext;
    write_file_atomic(staging_ / file, content);
    artifacts_[name] = Json{{"file", file}, {"sha256", digest}};
    return staging_ / file;
}

fs::path StageWriter::directory_artifact(const std::string& name) {
    if (artifacts_.contains(name)) throw IntegrityError("artifact '" + name + "' written twice");
    artifacts_[name] = Json{{"dir", name}};
    fs::create_directories(staging_ / name);
    return staging_ / name;
}

void StageWriter::log(std::string_view line) {
    log_ << line << "\n";
    log_.flush();
    std::cerr << "[" << stage_ << "] " << line << "\n";
}

void StageWriter::commit(StageManifest manifest) {
    for (auto& [name, entry] : artifacts_.items()) {
        if (!entry.contains("dir")) continue;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(staging_ / entry.at("dir").get<std::string>())) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        Json listing = Json::object();
        for (const auto& f : files) listing[f.filename().string()] = sha256_file(f);
        entry["files"] = std::move(listing);
    }
    if (manifest.stage.empty()) manifest.stage = stage_;
    // Where a run lives is not part of what it computed.
    auto effective = config_.doc();
    effective.erase("run_id");
    effective.erase("output_root");
    manifest.params["run_config"] = std::move(effective);
    manifest.extras["artifacts"] = artifacts_;
    manifest.seal();
    manifest.write(staging_ / "manifest.json");
    log_.close();
    fs::remove_all(final_);
    fs::rename(staging_, final_);
    committed_ = true;
}

StageManifest read_stage_manifest(const RunConfig& config, std::string_view stage) {
    const auto path = config.run_dir() / std::string(stage) / "manifest.json";
    if (!fs::is_regular_file(path)) {
        throw IoError("stage '" + std::string(stage) + "' has not been run (no " + path.string() + ")");
    }
    return StageManifest::read(path);
}

fs::path stage_artifact(const RunConfig& config, std::string_view stage, std::string_view name) {
    const auto m = read_stage_manifest(config, stage);
    const auto& arts = m.extras.value("artifacts", Json::object());
    const auto it = arts.find(std::string(name));
    if (it == arts.end()) {
        throw IoError("stage '" + std::string(stage) + "' has no artifact '" + std::string(name) + "'");
    }
    const auto dir = config.run_dir() / std::string(stage);
    if (it->contains("dir")) return dir / it->at("dir").get<std::string>();
    return dir / it->at("file").get<std::string>();
}

std::vector<std::string> audit_stage(const fs::path& stage_dir) {
    std::vector<std::string> problems;
    StageManifest m;
    try {
        m = StageManifest::read(stage_dir / "manifest.json");
    } catch (const Error& e) {
        problems.push_back(e.what());
        return problems;
    }
    if (!m.verify()) problems.push_back(stage_dir.string() + "/manifest.json: manifest_sha256 mismatch");
    const auto arts = m.extras.value("artifacts", Json::object());
    for (const auto& [name, entry] : arts.items()) {
        if (entry.contains("dir")) {
            const auto dir = stage_dir / entry.at("dir").get<std::string>();
            std::size_t seen = 0;
            if (fs::is_directory(dir)) {
                for (const auto& e : fs::directory_iterator(dir)) {
                    if (e.is_regular_file()) ++seen;
                }
            }
            const auto listed = entry.value("files", Json::object());
            for (const auto& [file, digest] : listed.items()) {
                const auto path = dir / file;
                if (!fs::is_regular_file(path)) {
                    problems.push_back(path.string() + ": missing");
                } else if (sha256_file(path) != digest.get<std::string>()) {
                    problems.push_back(path.string() + ": checksum mismatch");
                }
            }
            if (seen != listed.size()) {
                problems.push_back(dir.string() + ": file set differs from the manifest");
            }
            continue;
        }
        const auto path = stage_dir / entry.at("file").get<std::string>();
        if (!fs::is_regular_file(path)) {
            problems.push_back(path.string() + ": missing");
        } else if (sha256_file(path) != entry.at("sha256").get<std::string>()) {
            problems.push_back(path.string() + ": checksum mismatch");
        }
    }
    return problems;
}

}  // namespace physpref::app
