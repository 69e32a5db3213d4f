// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/ratings.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace physpref {
namespace {

int likert(const Json& value, std::string_view field, const std::string& source, std::size_t line) {
    if (!value.is_number_integer() && !value.is_number_unsigned()) {
        throw ValidationError(source + ":" + std::to_string(line) + ": field '" + std::string(field) +
                              "' must be an integer 1-5");
    }
    const auto score = value.get<std::int64_t>();
    if (score < 1 || score > 5) {
        throw ValidationError(source + ":" + std::to_string(line) + ": field '" + std::string(field) +
                              "' = " + std::to_string(score) + " outside 1-5");
    }
    return static_cast<int>(score);
}

std::optional<int> optional_axis(const Json& object, std::string_view field,
                                 const std::string& source, std::size_t line) {
    const auto it = object.find(std::string(field));
    if (it == object.end() || it->is_null()) {
        return std::nullopt;
    }
    return likert(*it, field, source, line);
}

std::string required_string(const Json& object, std::string_view field, const std::string& source,
                            std::size_t line) {
    const auto& value = object.at(std::string(field));
    if (!value.is_string() || value.get<std::string>().empty()) {
        throw ParseError(source, line, "field '" + std::string(field) + "' must be a non-empty string");
    }
    return value.get<std::string>();
}

}  // namespace

int RatingRecord::triple_sum() const {
    if (!complete_triple()) {
        throw ValidationError("record " + rater_id + "/" + video_id + " has no complete triple");
    }
    return *sa + *ptv + *persistence;
}

std::map<std::string, int> RatingRecord::dimension_scores() const {
    std::map<std::string, int> out;
    if (sa) out["sa"] = *sa;
    if (ptv) out["ptv"] = *ptv;
    if (persistence) out["persistence"] = *persistence;
    for (const auto& [law, score] : law_scores) {
        out[law] = score;
    }
    return out;
}

Json to_json(const RatingRecord& r) {
    Json j;
    j["rater_id"] = r.rater_id;
    j["video_id"] = r.video_id;
    j["prompt_id"] = r.prompt_id;
    j["group_id"] = r.group_id;
    j["generator_id"] = r.generator_id;
    j["sa"] = r.sa ? Json(*r.sa) : Json(nullptr);
    j["ptv"] = r.ptv ? Json(*r.ptv) : Json(nullptr);
    j["persistence"] = r.persistence ? Json(*r.persistence) : Json(nullptr);
    j["law_scores"] = r.law_scores;
    j["telemetry"] = {{"stay_time_seconds", r.telemetry.stay_time_seconds},
                      {"play_count", r.telemetry.play_count}};
    return j;
}

RatingRecord rating_from_json(const Json& object, const std::string& source, std::size_t line) {
    check_fields(object,
                 {"rater_id", "video_id", "prompt_id", "group_id", "generator_id", "sa", "ptv",
                  "persistence", "law_scores", "telemetry"},
                 {"rater_id", "video_id", "prompt_id", "group_id", "generator_id", "telemetry"},
                 source, line);
    RatingRecord r;
    r.rater_id = required_string(object, "rater_id", source, line);
    r.video_id = required_string(object, "video_id", source, line);
    r.prompt_id = required_string(object, "prompt_id", source, line);
    r.group_id = required_string(object, "group_id", source, line);
    r.generator_id = required_string(object, "generator_id", source, line);
    r.sa = optional_axis(object, "sa", source, line);
    r.ptv = optional_axis(object, "ptv", source, line);
    r.persistence = optional_axis(object, "persistence", source, line);

    if (const auto it = object.find("law_scores"); it != object.end() && !it->is_null()) {
        if (!it->is_object()) {
            throw ParseError(source, line, "field 'law_scores' must be an object");
        }
        if (it->size() > 3) {
            throw ValidationError(source + ":" + std::to_string(line) +
                                  ": at most 3 law scores per record");
        }
        for (const auto& [law, value] : it->items()) {
            r.law_scores[law] = likert(value, law, source, line);
        }
    }

    const auto& tele = object.at("telemetry");
    if (!tele.is_object()) {
        throw ParseError(source, line, "field 'telemetry' must be an object");
    }
    check_fields(tele, {"stay_time_seconds", "play_count"}, {"stay_time_seconds", "play_count"},
                 source, line);
    const auto& stay = tele.at("stay_time_seconds");
    const auto& plays = tele.at("play_count");
    if (!stay.is_number() || !(plays.is_number_integer() || plays.is_number_unsigned())) {
        throw ParseError(source, line, "telemetry fields must be numeric");
    }
    r.telemetry.stay_time_seconds = stay.get<double>();
    r.telemetry.play_count = plays.get<std::int64_t>();
    if (!(r.telemetry.stay_time_seconds >= 0.0) || r.telemetry.play_count < 0) {
        throw ValidationError(source + ":" + std::to_string(line) + ": telemetry must be nonnegative");
    }
    return r;
}

std::vector<RatingRecord> parse_ratings(std::string_view text, const std::string& source) {
    std::vector<RatingRecord> out;
    for (const auto& row : parse_jsonl(text, source)) {
        out.push_back(rating_from_json(row.value, source, row.line));
    }
    return out;
}

std::vector<RatingRecord> ingest_ratings(const std::filesystem::path& path) {
    return parse_ratings(read_text_file(path), path.string());
}

double median(std::vector<double> values) {
    if (values.empty()) {
        throw ValidationError("median of empty set");
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double population_stddev(std::span<const double> values) {
    if (values.empty()) {
        return 0.0;
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double ss = 0.0;
    for (const double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss / values.size());
}

Json to_json(const RaterQCReport& r) {
    Json j;
    j["rater_id"] = r.rater_id;
    j["constancy_std"] = r.constancy_std;
    j["copy_paste_rate"] = r.copy_paste_rate;
    j["peer_mae"] = r.peer_mae ? Json(*r.peer_mae) : Json(nullptr);
    j["telemetry_flags"] = r.telemetry_flags;
    j["flags"] = r.flags;
    j["removed"] = r.removed;
    return j;
}

QCResult qc_filter_raters(std::span<const RatingRecord> records, const QCConfig& config,
                          std::optional<std::span<const RatingRecord>> peer_pool) {
    if (records.empty()) {
        throw ValidationError("qc_filter_raters: no records");
    }
    const auto pool = peer_pool.value_or(records);

    // (video, dimension) -> rater -> score, first occurrence wins.
    std::map<std::pair<std::string, std::string>, std::map<std::string, int>> cells;
    for (const auto& r : pool) {
        for (const auto& [dim, score] : r.dimension_scores()) {
            cells[{r.video_id, dim}].try_emplace(r.rater_id, score);
        }
    }

    std::map<std::string, std::vector<const RatingRecord*>> by_rater;
    for (const auto& r : records) {
        by_rater[r.rater_id].push_back(&r);
    }

    QCResult result;
    for (const auto& [rater, rows] : by_rater) {
        RaterQCReport report;
        report.rater_id = rater;

        std::vector<double> axis_scores;
        for (const auto* r : rows) {
            for (const auto& opt : {r->sa, r->ptv, r->persistence}) {
                if (opt) axis_scores.push_back(*opt);
            }
        }
        report.constancy_std = population_stddev(axis_scores);
        if (rows.size() >= config.constancy_min_records &&
            report.constancy_std < config.constancy_threshold) {
            report.flags.insert("constancy");
        }

        std::map<std::string, std::map<std::string, int>> per_video;
        for (const auto* r : rows) {
            for (const auto& [dim, score] : r->dimension_scores()) {
                per_video[r->video_id].try_emplace(dim, score);
            }
        }
        std::size_t assessed = 0;
        std::size_t identical = 0;
        for (const auto& [video, dims] : per_video) {
            if (dims.size() < 2) continue;
            ++assessed;
            const int first = dims.begin()->second;
            identical += std::all_of(dims.begin(), dims.end(),
                                     [first](const auto& kv) { return kv.second == first; });
        }
        report.copy_paste_rate = assessed ? static_cast<double>(identical) / assessed : 0.0;
        if (assessed >= config.copy_paste_min_videos &&
            report.copy_paste_rate >= config.copy_paste_threshold) {
            report.flags.insert("copy_paste");
        }

        double abs_err = 0.0;
        std::size_t shared = 0;
        for (const auto& [video, dims] : per_video) {
            for (const auto& [dim, score] : dims) {
                const auto cell = cells.find({video, dim});
                if (cell == cells.end()) continue;
                std::vector<double> others;
                for (const auto& [other, other_score] : cell->second) {
                    if (other != rater) others.push_back(other_score);
                }
                if (others.empty()) continue;
                abs_err += std::abs(score - median(std::move(others)));
                ++shared;
            }
        }
        if (shared > 0) {
            report.peer_mae = abs_err / shared;
            if (*report.peer_mae > config.peer_mae_threshold) {
                report.flags.insert("peer_mae");
            }
        }

        std::size_t short_stay = 0;
        std::size_t no_play = 0;
        for (const auto* r : rows) {
            short_stay += r->telemetry.stay_time_seconds < config.clip_duration_seconds;
            no_play += r->telemetry.play_count == 0;
        }
        const double n = static_cast<double>(rows.size());
        if (short_stay / n >= config.telemetry_fraction) report.telemetry_flags.insert("short_stay");
        if (no_play / n >= config.telemetry_fraction) report.telemetry_flags.insert("no_play");
        if (!report.telemetry_flags.empty()) {
            report.flags.insert("telemetry");
        }

        report.removed = static_cast<int>(report.flags.size()) >= config.min_flags_to_remove;
        if (!report.removed) {
            result.retained_raters.push_back(rater);
        }
        result.reports.push_back(std::move(report));
    }
    return result;
}

std::vector<RatingRecord> keep_raters(std::span<const RatingRecord> records,
                                      std::span<const std::string> raters) {
    const std::set<std::string> keep(raters.begin(), raters.end());
    std::vector<RatingRecord> out;
    for (const auto& r : records) {
        if (keep.contains(r.rater_id)) out.push_back(r);
    }
    return out;
}

std::vector<std::string> complete_triple_raters(const std::string& video_id,
                                                std::span<const RatingRecord> records) {
    std::set<std::string> raters;
    for (const auto& r : records) {
        if (r.video_id == video_id && r.complete_triple()) raters.insert(r.rater_id);
    }
    return {raters.begin(), raters.end()};
}

double aggregate_score(const std::string& video_id, std::span<const RatingRecord> records) {
    std::map<std::string, std::pair<double, int>> per_rater;
    for (const auto& r : records) {
        if (r.video_id != video_id || !r.complete_triple()) continue;
        auto& [sum, count] = per_rater[r.rater_id];
        sum += r.triple_sum();
        ++count;
    }
    if (per_rater.empty()) {
        throw UndefinedScoreError("video " + video_id + " has no complete-triple rater");
    }
    double total = 0.0;
    for (const auto& [rater, acc] : per_rater) {
        total += acc.first / acc.second;
    }
    return total / static_cast<double>(per_rater.size());
}

std::map<std::string, double> median_video_scores(const std::string& video_id,
                                                  std::span<const RatingRecord> records) {
    std::map<std::string, std::map<std::string, int>> per_dim;
    for (const auto& r : records) {
        if (r.video_id != video_id) continue;
        for (const auto& [dim, score] : r.dimension_scores()) {
            per_dim[dim].try_emplace(r.rater_id, score);
        }
    }
    std::map<std::string, double> out;
    for (const auto& [dim, scores] : per_dim) {
        std::vector<double> values;
        for (const auto& [rater, s] : scores) values.push_back(s);
        out[dim] = median(std::move(values));
    }
    return out;
}

}  // namespace physpref
