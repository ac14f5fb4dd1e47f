#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "provtag/types.hpp"

namespace provtag {

/// Ground truth for a trace: which events and entities belong to the attack.
/// Training traces are expected to carry empty malicious sets. The optional
/// steps map groups kill-chain events for missed-step reporting.
struct Labels {
    std::set<std::string> malicious_events;
    std::set<std::string> malicious_entities;
    std::map<std::string, std::vector<std::string>> steps;

    bool event_is_malicious(const std::string& uuid) const { return malicious_events.count(uuid) > 0; }
    bool entity_is_malicious(const std::string& id) const { return malicious_entities.count(id) > 0; }
    bool empty() const { return malicious_events.empty() && malicious_entities.empty(); }
};

inline nlohmann::json labels_to_json(const Labels& l) {
    nlohmann::json j;
    j["malicious_events"] = l.malicious_events;
    j["malicious_entities"] = l.malicious_entities;
    if (!l.steps.empty()) j["steps"] = l.steps;
    return j;
}

inline Labels labels_from_json(const nlohmann::json& j) {
    Labels l;
    if (j.contains("malicious_events"))
        for (const auto& u : j.at("malicious_events")) l.malicious_events.insert(u.get<std::string>());
    if (j.contains("malicious_entities"))
        for (const auto& u : j.at("malicious_entities")) l.malicious_entities.insert(u.get<std::string>());
    if (j.contains("steps"))
        for (auto it = j["steps"].begin(); it != j["steps"].end(); ++it)
            l.steps[it.key()] = it.value().get<std::vector<std::string>>();
    return l;
}

inline void save_labels(const std::string& path, const Labels& l) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write labels file: " + path);
    out << labels_to_json(l).dump(2) << '\n';
}

inline Labels load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open labels file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("labels " + path + ": " + e.what());
    }
    return labels_from_json(j);
}

}  // namespace provtag
