#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "provtag/engine.hpp"
#include "provtag/graph.hpp"
#include "provtag/labels.hpp"

namespace provtag {

/// Event-level scoring: an event is a false alarm if it alarmed without a
/// malicious label, a true alarm if it alarmed with one; a labeled step is
/// missed when none of its events alarmed.
struct EventScore {
    size_t alarms = 0;  // individual alarm records
    std::set<std::string> fa_events;
    std::set<std::string> tp_events;
    std::map<std::string, size_t> fa_by_type;
    std::map<std::string, size_t> tp_by_type;
    std::vector<std::string> missed_steps;

    size_t fa_count() const { return fa_events.size(); }
    size_t tp_count() const { return tp_events.size(); }
};

inline EventScore score_events(const std::vector<Alarm>& alarms, const Labels& labels,
                               const std::set<std::string>* known_uuids = nullptr) {
    EventScore s;
    s.alarms = alarms.size();
    for (const Alarm& a : alarms) {
        if (known_uuids && !known_uuids->count(a.event_uuid))
            throw ConfigError("alarm references unknown event uuid: " + a.event_uuid);
        if (labels.event_is_malicious(a.event_uuid)) {
            s.tp_events.insert(a.event_uuid);
            s.tp_by_type[to_string(a.type)]++;
        } else {
            s.fa_events.insert(a.event_uuid);
            s.fa_by_type[to_string(a.type)]++;
        }
    }
    for (const auto& [step, uuids] : labels.steps) {
        bool hit = false;
        for (const auto& u : uuids)
            if (s.tp_events.count(u)) {
                hit = true;
                break;
            }
        if (!hit) s.missed_steps.push_back(step);
    }
    return s;
}

/// Reduction factor of a trained run against the conservative baseline on
/// the same trace. A fully clean trained run reports "all removed".
struct Reduction {
    size_t baseline_fa = 0;
    size_t trained_fa = 0;
    bool all_removed = false;
    double factor = 1.0;
};

inline Reduction reduction_factor(size_t baseline_fa, size_t trained_fa) {
    Reduction r;
    r.baseline_fa = baseline_fa;
    r.trained_fa = trained_fa;
    if (trained_fa == 0) {
        r.all_removed = baseline_fa > 0;
        r.factor = baseline_fa > 0 ? std::numeric_limits<double>::infinity() : 1.0;
    } else {
        r.factor = static_cast<double>(baseline_fa) / static_cast<double>(trained_fa);
    }
    return r;
}

/// Entity-level scoring with the semantic and 1-hop filters: corrupted
/// benign objects are victims rather than detections, and optionally any
/// false-positive entity one hop from ground truth is excluded.
struct EntityScore {
    std::set<std::string> tp;
    std::set<std::string> fp;
    std::set<std::string> fn;
    size_t fp_filtered_semantic = 0;
    size_t fp_filtered_one_hop = 0;
};

inline EntityScore score_entities(const std::vector<Alarm>& alarms, const Labels& labels,
                                  const ProvGraph& graph, bool one_hop_filter) {
    EntityScore s;
    std::set<std::string> flagged;
    std::set<std::string> corrupt_objects;
    for (const Alarm& a : alarms) {
        flagged.insert(a.subj_id);
        flagged.insert(a.obj_id);
        if (a.type == AlarmType::Corrupt) corrupt_objects.insert(a.obj_id);
    }
    for (const auto& id : flagged) {
        if (labels.entity_is_malicious(id)) {
            s.tp.insert(id);
            continue;
        }
        if (corrupt_objects.count(id)) {
            ++s.fp_filtered_semantic;
            continue;
        }
        s.fp.insert(id);
    }
    if (one_hop_filter) {
        std::set<std::string> kept;
        for (const auto& id : s.fp) {
            const ProvNode* n = graph.find(id);
            bool adjacent = false;
            if (n) {
                for (uint32_t nb : graph.neighbors(n->idx)) {
                    if (labels.entity_is_malicious(graph.node(nb).id)) {
                        adjacent = true;
                        break;
                    }
                }
            }
            if (adjacent)
                ++s.fp_filtered_one_hop;
            else
                kept.insert(id);
        }
        s.fp = std::move(kept);
    }
    for (const auto& id : labels.malicious_entities)
        if (!s.tp.count(id)) s.fn.insert(id);
    return s;
}

/// Distribution of stored non-zero gradient entries per node.
struct GradientStats {
    std::vector<size_t> per_node;
    double mean = 0.0;
    double median = 0.0;
    size_t max = 0;
    std::map<size_t, size_t> histogram;  // bucket lower bound → node count

    bool long_tailed() const { return median <= mean; }
};

inline GradientStats gradient_stats(const ProvGraph& graph) {
    GradientStats s;
    s.per_node.reserve(graph.size());
    size_t total = 0;
    for (const ProvNode& n : graph.nodes()) {
        const size_t c = n.grad_entries();
        s.per_node.push_back(c);
        total += c;
        s.max = std::max(s.max, c);
        size_t bucket = 0;
        while ((size_t{1} << bucket) <= c) ++bucket;  // 0, [1], [2,3], [4,7], ...
        s.histogram[bucket == 0 ? 0 : (size_t{1} << (bucket - 1))]++;
    }
    if (!s.per_node.empty()) {
        s.mean = static_cast<double>(total) / static_cast<double>(s.per_node.size());
        std::vector<size_t> sorted = s.per_node;
        std::sort(sorted.begin(), sorted.end());
        const size_t m = sorted.size() / 2;
        s.median = (sorted.size() % 2 == 1)
                       ? static_cast<double>(sorted[m])
                       : 0.5 * static_cast<double>(sorted[m - 1] + sorted[m]);
    }
    return s;
}

inline nlohmann::json event_score_to_json(const EventScore& s) {
    return {{"alarms", s.alarms},
            {"false_alarm_events", s.fa_count()},
            {"true_alarm_events", s.tp_count()},
            {"fa_by_type", s.fa_by_type},
            {"tp_by_type", s.tp_by_type},
            {"missed_steps", s.missed_steps}};
}

inline nlohmann::json entity_score_to_json(const EntityScore& s) {
    return {{"tp", std::vector<std::string>(s.tp.begin(), s.tp.end())},
            {"fp", std::vector<std::string>(s.fp.begin(), s.fp.end())},
            {"fn", std::vector<std::string>(s.fn.begin(), s.fn.end())},
            {"fp_filtered_semantic", s.fp_filtered_semantic},
            {"fp_filtered_one_hop", s.fp_filtered_one_hop}};
}

inline nlohmann::json gradient_stats_to_json(const GradientStats& s) {
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [bucket, count] : s.histogram) hist[std::to_string(bucket)] = count;
    return {{"nodes", s.per_node.size()},
            {"mean", s.mean},
            {"median", s.median},
            {"max", s.max},
            {"histogram", hist}};
}

}  // namespace provtag
