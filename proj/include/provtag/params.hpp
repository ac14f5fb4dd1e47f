#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "provtag/feature.hpp"
#include "provtag/rules.hpp"
#include "provtag/types.hpp"

namespace provtag {

/// Which adaptive parameter families a training run may modify.
struct TunedSubsets {
    bool a = true;
    bool g = true;
    bool t = true;

    bool any() const { return a || g || t; }

    static TunedSubsets none() { return {false, false, false}; }

    /// Parses "A,G,T" / "A" / "GT" style lists (case-insensitive).
    static TunedSubsets parse(const std::string& s) {
        TunedSubsets ts = none();
        for (char c : s) {
            switch (c) {
                case 'a': case 'A': ts.a = true; break;
                case 'g': case 'G': ts.g = true; break;
                case 't': case 'T': ts.t = true; break;
                case ',': case ' ': case '{': case '}': break;
                default: throw ConfigError(std::string("unknown parameter family '") + c + "' (expected A, G, T)");
            }
        }
        return ts;
    }

    std::string str() const {
        std::string out;
        if (a) out += "A";
        if (g) out += out.empty() ? "G" : ",G";
        if (t) out += out.empty() ? "T" : ",T";
        return out.empty() ? "-" : out;
    }
};

/// Per-epoch accumulated loss gradients, reset before every forward replay.
struct LossGrads {
    std::map<uint32_t, double> a;  // feature id → ∂Loss_events/∂a
    std::map<uint32_t, double> g;  // edge id → ∂Loss_events/∂g
    std::map<uint32_t, double> t;  // edge id → ∂Loss_events/∂thr
    double event_loss_sum = 0.0;
    size_t loss_events = 0;

    void reset() {
        a.clear();
        g.clear();
        t.clear();
        event_loss_sum = 0.0;
        loss_events = 0;
    }
};

inline constexpr double kDefaultG0 = 1.0;
inline constexpr double kDefaultT0 = 0.5;
inline constexpr double kDefaultA0Socket = 0.0;
inline constexpr double kDefaultA0File = 0.5;

/// Default initial integrity for a node-feature key. Sockets start at 0
/// (worst case: any remote peer may be an attacker); files without history
/// start neutral. Pipe/memory features are not part of the A family.
inline double a_default_for_feature(const std::string& feature) {
    if (feature.rfind("sock:", 0) == 0) return kDefaultA0Socket;
    return kDefaultA0File;
}

/// The three adaptive parameter families. Absent keys mean "still at the
/// conservative default"; entries materialize when learning moves them.
class ParamStore {
  public:
    std::map<uint32_t, double> a;  // feature id → initial integrity
    std::map<uint32_t, double> g;  // edge id → propagation rate
    std::map<uint32_t, double> t;  // edge id → alarm threshold
    LossGrads loss_grads;

    std::optional<double> a_lookup(uint32_t feat) const {
        auto it = a.find(feat);
        if (it == a.end()) return std::nullopt;
        return it->second;
    }
    double g_of(uint32_t edge) const {
        auto it = g.find(edge);
        return it == g.end() ? kDefaultG0 : it->second;
    }
    double t_of(uint32_t edge) const {
        auto it = t.find(edge);
        return it == t.end() ? kDefaultT0 : it->second;
    }

    bool at_defaults() const { return a.empty() && g.empty() && t.empty(); }
};

struct ModelMeta {
    uint64_t config_hash = 0;
    uint32_t epochs = 0;
};

inline nlohmann::json model_to_json(const ParamStore& params, const FeatureInterner& feats,
                                    const EdgeInterner& edges, const RuleConfig& rc,
                                    const ModelMeta& meta) {
    nlohmann::json j;
    nlohmann::json ja = nlohmann::json::object();
    for (const auto& [feat, i] : params.a) {
        const std::string& key = feats.str(feat);
        double c = 1.0;
        if (key.rfind("file:", 0) == 0) c = rc.conf_for_path(key.substr(5));
        ja[key] = {{"c", c}, {"i", i}};
    }
    j["A"] = ja;
    nlohmann::json jg = nlohmann::json::object();
    for (const auto& [edge, v] : params.g) jg[edges.str(edge, feats)] = v;
    j["G"] = jg;
    nlohmann::json jt = nlohmann::json::object();
    for (const auto& [edge, v] : params.t) jt[edges.str(edge, feats)] = v;
    j["T"] = jt;
    char hash_hex[17];
    snprintf(hash_hex, sizeof hash_hex, "%016llx", static_cast<unsigned long long>(meta.config_hash));
    j["meta"] = {{"defaults",
                  {{"a0_socket", kDefaultA0Socket},
                   {"a0_file", kDefaultA0File},
                   {"g0", kDefaultG0},
                   {"t0", kDefaultT0}}},
                 {"config_hash", std::string(hash_hex)},
                 {"epochs", meta.epochs}};
    return j;
}

inline void save_model(const std::string& path, const ParamStore& params, const FeatureInterner& feats,
                       const EdgeInterner& edges, const RuleConfig& rc, const ModelMeta& meta) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write model file: " + path);
    out << model_to_json(params, feats, edges, rc, meta).dump(2) << '\n';
}

inline uint32_t intern_edge_key_string(const std::string& key, FeatureInterner& feats, EdgeInterner& edges) {
    auto parts = split_edge_key(key);
    if (parts.size() != 3) throw ConfigError("malformed edge key: " + key);
    auto ty = normalize_event_type(parts[1]);
    if (!ty) throw ConfigError("edge key with unknown event type: " + key);
    return edges.intern(feats.intern(parts[0]), *ty, feats.intern(parts[2]));
}

/// Loads a model file into a ParamStore, interning all keys into the
/// caller's interners so the ids stay coherent with the replay.
inline ParamStore load_model(const std::string& path, FeatureInterner& feats, EdgeInterner& edges,
                             ModelMeta* meta_out = nullptr) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("model " + path + ": " + e.what());
    }
    ParamStore params;
    if (j.contains("A"))
        for (auto it = j["A"].begin(); it != j["A"].end(); ++it)
            params.a[feats.intern(it.key())] = it.value().at("i").get<double>();
    if (j.contains("G"))
        for (auto it = j["G"].begin(); it != j["G"].end(); ++it)
            params.g[intern_edge_key_string(it.key(), feats, edges)] = it.value().get<double>();
    if (j.contains("T"))
        for (auto it = j["T"].begin(); it != j["T"].end(); ++it)
            params.t[intern_edge_key_string(it.key(), feats, edges)] = it.value().get<double>();
    if (meta_out && j.contains("meta")) {
        const auto& m = j["meta"];
        if (m.contains("epochs")) meta_out->epochs = m["epochs"].get<uint32_t>();
        if (m.contains("config_hash"))
            meta_out->config_hash = std::stoull(m["config_hash"].get<std::string>(), nullptr, 16);
    }
    return params;
}

}  // namespace provtag
