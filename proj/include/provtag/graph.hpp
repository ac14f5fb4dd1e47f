#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "provtag/feature.hpp"
#include "provtag/gradmap.hpp"
#include "provtag/params.hpp"
#include "provtag/rules.hpp"
#include "provtag/types.hpp"

namespace provtag {

/// One live entity in the provenance graph. Data tag <c,i> on every node,
/// code tag p on processes. The gradient maps hold the tag's partial
/// derivatives with respect to A (by feature) and G (by edge); c is never
/// learned and carries none.
struct ProvNode {
    uint32_t idx = 0;
    std::string id;
    EntityKind kind = EntityKind::File;
    uint32_t feat = 0;

    double c = 1.0;
    double i = 1.0;
    double p = 1.0;  // processes only
    SubjectType stype = SubjectType::Benign;
    uint32_t subj_events = 0;  // events with this node as subject (decay clock)

    GradMap gi_a, gi_g;  // ∂i/∂a, ∂i/∂g
    GradMap gp_a, gp_g;  // ∂p/∂a, ∂p/∂g

    bool is_process() const { return kind == EntityKind::Process; }

    size_t grad_entries() const {
        return gi_a.size() + gi_g.size() + gp_a.size() + gp_g.size();
    }
};

enum class TagScalar : uint8_t { C, I, P };

/// Initial data tag for a non-process node: integrity from the learned A
/// entry if one exists, else the conservative default; confidentiality from
/// the static conf rules, never learned.
inline std::pair<double, double> init_tags(const std::string& feature, EntityKind kind,
                                           const ParamStore& params, const RuleConfig& rc,
                                           std::optional<uint32_t> feat_id = std::nullopt) {
    double c = 1.0;
    if (kind == EntityKind::File && feature.rfind("file:", 0) == 0)
        c = rc.conf_for_path(feature.substr(5));
    double i;
    std::optional<double> learned;
    if (feat_id) learned = params.a_lookup(*feat_id);
    if (learned)
        i = *learned;
    else
        i = (kind == EntityKind::Socket) ? kDefaultA0Socket : kDefaultA0File;
    return {c, i};
}

class ProvGraph {
  public:
    explicit ProvGraph(FeatureInterner& feats) : feats_(feats) {}

    size_t size() const { return nodes_.size(); }
    ProvNode& node(uint32_t idx) { return nodes_[idx]; }
    const ProvNode& node(uint32_t idx) const { return nodes_[idx]; }
    const std::vector<ProvNode>& nodes() const { return nodes_; }

    const ProvNode* find(const std::string& id) const {
        auto it = by_id_.find(id);
        return it == by_id_.end() ? nullptr : &nodes_[it->second];
    }

    /// Returns the existing node unchanged, or creates one. Non-process
    /// nodes get their data tag from A; process nodes start with placeholder
    /// tags that later events overwrite; pipes and memory inherit the data
    /// tag (and gradients) of the subject that first touched them.
    ProvNode& upsert(const std::string& id, EntityKind kind, const std::string& feature,
                     const ParamStore& params, const RuleConfig& rc, bool track_gradients,
                     double prune_eps, const ProvNode* creator = nullptr) {
        auto it = by_id_.find(id);
        if (it != by_id_.end()) {
            ProvNode& n = nodes_[it->second];
            if (n.kind != kind)
                throw GraphError("entity '" + id + "' seen as both " + to_string(n.kind) + " and " +
                                 to_string(kind));
            return n;
        }
        ProvNode n;
        n.idx = static_cast<uint32_t>(nodes_.size());
        n.id = id;
        n.kind = kind;
        n.feat = feats_.intern(feature);
        if (kind == EntityKind::Process) {
            n.c = n.i = n.p = 1.0;
        } else if (kind == EntityKind::Pipe || kind == EntityKind::Memory) {
            if (creator) {
                n.c = creator->c;
                n.i = creator->i;
                if (track_gradients) {
                    n.gi_a = creator->gi_a;
                    n.gi_g = creator->gi_g;
                }
            } else {
                n.c = n.i = 1.0;
            }
        } else {
            auto [c, i] = init_tags(feature, kind, params, rc, n.feat);
            n.c = c;
            n.i = i;
            if (track_gradients) n.gi_a.set(n.feat, 1.0, prune_eps);
        }
        by_id_.emplace(n.id, n.idx);
        nodes_.push_back(std::move(n));
        return nodes_.back();
    }

    // --- adjacency, recorded only when eval needs the 1-hop filter ---

    void enable_adjacency() { record_adjacency_ = true; }
    bool adjacency_enabled() const { return record_adjacency_; }

    void record_edge(uint32_t a, uint32_t b) {
        if (!record_adjacency_ || a == b) return;
        uint64_t key = (static_cast<uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
        if (!seen_pairs_.insert(key).second) return;
        neighbors_.resize(nodes_.size());
        neighbors_[a].push_back(b);
        neighbors_[b].push_back(a);
    }

    const std::vector<uint32_t>& neighbors(uint32_t idx) const {
        static const std::vector<uint32_t> empty;
        if (idx >= neighbors_.size()) return empty;
        return neighbors_[idx];
    }

  private:
    FeatureInterner& feats_;
    std::vector<ProvNode> nodes_;
    std::unordered_map<std::string, uint32_t> by_id_;
    bool record_adjacency_ = false;
    std::unordered_set<uint64_t> seen_pairs_;
    std::vector<std::vector<uint32_t>> neighbors_;
};

}  // namespace provtag
