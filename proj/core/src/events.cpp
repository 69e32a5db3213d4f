// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#include "physpref/events.hpp"

#include <cctype>

#include "physpref/error.hpp"

namespace physpref {

std::string_view to_string(EventClass c) noexcept {
    switch (c) {
        case EventClass::A: return "A";
        case EventClass::B: return "B";
        case EventClass::C: return "C";
        case EventClass::D: return "D";
        case EventClass::E: return "E";
        case EventClass::F: return "F";
        case EventClass::G: return "G";
        case EventClass::Unclassified: return "unclassified";
    }
    return "unclassified";
}

EventClass event_class_from_string(std::string_view name) {
    for (const auto c : kAllEventClasses) {
        if (to_string(c) == name) return c;
    }
    throw ValidationError("unknown event class '" + std::string(name) + "'");
}

std::string_view describe(EventClass c) noexcept {
    switch (c) {
        case EventClass::A: return "collision/rebound";
        case EventClass::B: return "destruction/deformation";
        case EventClass::C: return "fluids/liquids";
        case EventClass::D: return "shadow/reflection";
        case EventClass::E: return "chain/multi-stage";
        case EventClass::F: return "rolling/sliding";
        case EventClass::G: return "throwing/ballistic";
        case EventClass::Unclassified: return "unclassified";
    }
    return "unclassified";
}

// Keep in sync with data/event_rules.json.
const EventRuleTable& EventRuleTable::builtin() {
    static const EventRuleTable table{
        "event-rules/1",
        {
            {EventClass::A, {"bounc", "rebound", "collid", "collision", "hit", "strik", "struck",
                             "bump", "crash", "knock", "ricochet"}},
            {EventClass::B, {"break", "broke", "shatter", "crush", "smash", "deform", "bend",
                             "crack", "tear", "squash", "splinter", "crumbl", "fell"}},
            {EventClass::C, {"pour", "liquid", "water", "syrup", "fluid", "drip", "splash", "spill",
                             "honey", "milk", "chocolate", "juice", "droplet"}},
            {EventClass::D, {"shadow", "reflect", "mirror", "glare"}},
            {EventClass::E, {"chain", "domino", "cascade", "trigger", "sequence"}},
            {EventClass::F, {"roll", "slide", "slid", "glide", "skid", "incline", "ramp"}},
            {EventClass::G, {"throw", "threw", "thrown", "toss", "launch", "projectile", "fling",
                             "flung", "catapult", "ballistic", "lob"}},
        }};
    return table;
}

EventRuleTable EventRuleTable::from_json(const Json& doc) {
    EventRuleTable table;
    try {
        table.version = doc.at("version").get<std::string>();
        for (const auto& [name, words] : doc.at("classes").items()) {
            const auto c = event_class_from_string(name);
            if (c == EventClass::Unclassified) {
                throw ValidationError("rule table may not list keywords for 'unclassified'");
            }
            table.keywords[c] = words.get<std::vector<std::string>>();
        }
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("bad event rule table: ") + e.what());
    }
    return table;
}

EventRuleTable EventRuleTable::load(const std::filesystem::path& path) {
    Json doc;
    try {
        doc = Json::parse(read_text_file(path));
    } catch (const Json::parse_error& e) {
        throw ParseError(path.string(), 1, e.what());
    }
    return from_json(doc);
}

Json EventRuleTable::to_json() const {
    Json classes = Json::object();
    for (const auto& [c, words] : keywords) {
        classes[std::string(to_string(c))] = words;
    }
    return {{"version", version}, {"classes", classes}};
}

std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (const char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isalpha(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

EventClass classify_event(std::string_view prompt_text, const EventRuleTable& rules) {
    const auto words = tokenize_words(prompt_text);
    EventClass best = EventClass::Unclassified;
    int best_hits = 0;
    for (const auto c : kAllEventClasses) {
        const auto it = rules.keywords.find(c);
        if (it == rules.keywords.end()) continue;
        int hits = 0;
        for (const auto& keyword : it->second) {
            for (const auto& word : words) {
                if (word.starts_with(keyword)) {
                    ++hits;
                    break;
                }
            }
        }
        if (hits > best_hits) {
            best_hits = hits;
            best = c;
        }
    }
    return best;
}

}  // namespace physpref
