// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "physpref/io.hpp"

namespace physpref {

/// Induced physical event classes used for class-balanced quota sampling.
enum class EventClass { A, B, C, D, E, F, G, Unclassified };

inline constexpr std::array<EventClass, 8> kAllEventClasses = {
    EventClass::A, EventClass::B, EventClass::C, EventClass::D,
    EventClass::E, EventClass::F, EventClass::G, EventClass::Unclassified};

std::string_view to_string(EventClass c) noexcept;
EventClass event_class_from_string(std::string_view name);

/// Human label, e.g. "collision/rebound".
std::string_view describe(EventClass c) noexcept;

/// Keyword rules: a class scores one hit for every keyword that is a prefix
/// of some lowercase alphabetic word of the prompt. Highest hit count wins;
/// ties go to the earlier class in A..G order; no hits means Unclassified.
struct EventRuleTable {
    std::string version;
    std::map<EventClass, std::vector<std::string>> keywords;

    static const EventRuleTable& builtin();
    static EventRuleTable from_json(const Json& doc);
    static EventRuleTable load(const std::filesystem::path& path);
    Json to_json() const;
};

EventClass classify_event(std::string_view prompt_text,
                          const EventRuleTable& rules = EventRuleTable::builtin());

/// Lowercase alphabetic words of `text`.
std::vector<std::string> tokenize_words(std::string_view text);

}  // namespace physpref
