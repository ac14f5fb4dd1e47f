#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "provtag/feature.hpp"
#include "provtag/types.hpp"

namespace provtag {

struct ConfRule {
    std::string path_prefix;
    double c = 0.0;  // confidentiality assigned to matching files
};

/// Static rule-table hyperparameters. These are the non-learned knobs; the
/// learned parameter families A/G/T live in ParamStore.
struct RuleConfig {
    double a_b = 0.2;    // write attenuation, benign subjects
    double a_e = 0.05;   // write attenuation, suspect-environment subjects
    double d_b = 0.9;    // decay factor, benign subjects
    double d_e = 0.9;    // decay factor, suspect-environment subjects
    double t_qb = 0.75;  // quiescent integrity target, benign
    double t_qe = 0.25;  // quiescent integrity target, suspect environment
    double susp_env = 0.25;
    uint32_t decay_period = 100;  // events per subject between decays
    std::vector<ConfRule> conf_rules;
    Granularity granularity;

    void validate() const {
        auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!in01(a_b) || !in01(a_e) || !in01(d_b) || !in01(d_e) || !in01(t_qb) || !in01(t_qe) ||
            !in01(susp_env))
            throw ConfigError("rule config: all rate/target fields must lie in [0,1]");
        if (decay_period < 1) throw ConfigError("rule config: decay_period must be >= 1");
        for (const auto& r : conf_rules)
            if (!in01(r.c)) throw ConfigError("rule config: conf rule c must lie in [0,1]");
    }

    /// Initial confidentiality for a file path: longest matching prefix wins.
    double conf_for_path(const std::string& path) const {
        double c = 1.0;
        size_t best = 0;
        for (const auto& r : conf_rules) {
            if (path.rfind(r.path_prefix, 0) == 0 && r.path_prefix.size() >= best) {
                best = r.path_prefix.size();
                c = r.c;
            }
        }
        return c;
    }
};

inline RuleConfig rule_config_from_json(const nlohmann::json& j) {
    RuleConfig rc;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("a_b", rc.a_b);
    get("a_e", rc.a_e);
    get("d_b", rc.d_b);
    get("d_e", rc.d_e);
    get("t_qb", rc.t_qb);
    get("t_qe", rc.t_qe);
    get("susp_env", rc.susp_env);
    get("decay_period", rc.decay_period);
    if (j.contains("conf_rules")) {
        for (const auto& r : j.at("conf_rules"))
            rc.conf_rules.push_back({r.at("prefix").get<std::string>(), r.at("c").get<double>()});
    }
    if (j.contains("granularity")) {
        const auto& g = j.at("granularity");
        if (g.contains("socket_port")) rc.granularity.socket_include_port = g.at("socket_port").get<bool>();
    }
    rc.validate();
    return rc;
}

inline nlohmann::json rule_config_to_json(const RuleConfig& rc) {
    nlohmann::json j;
    j["a_b"] = rc.a_b;
    j["a_e"] = rc.a_e;
    j["d_b"] = rc.d_b;
    j["d_e"] = rc.d_e;
    j["t_qb"] = rc.t_qb;
    j["t_qe"] = rc.t_qe;
    j["susp_env"] = rc.susp_env;
    j["decay_period"] = rc.decay_period;
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& r : rc.conf_rules) rules.push_back({{"prefix", r.path_prefix}, {"c", r.c}});
    j["conf_rules"] = rules;
    j["granularity"] = {{"socket_port", rc.granularity.socket_include_port}};
    return j;
}

inline RuleConfig load_rule_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open rule config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("rule config " + path + ": " + e.what());
    }
    return rule_config_from_json(j);
}

/// FNV-1a over the canonical JSON dump; recorded in model metadata so a
/// model is never silently used with a different rule table.
inline uint64_t rule_config_hash(const RuleConfig& rc) {
    std::string s = rule_config_to_json(rc).dump();
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace provtag
