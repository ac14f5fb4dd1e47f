#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "provtag/event.hpp"
#include "provtag/feature.hpp"
#include "provtag/graph.hpp"
#include "provtag/params.hpp"
#include "provtag/rules.hpp"
#include "provtag/types.hpp"

namespace provtag {

struct Alarm {
    int64_t ts = 0;
    std::string event_uuid;
    AlarmType type = AlarmType::Corrupt;
    std::string subj_id, subj_feature;
    std::string obj_id, obj_feature;
    double f = 0.0;    // tag - thr, < 0 for every emitted alarm
    double tag = 0.0;  // triggering integrity tag
    double thr = 0.0;  // threshold in effect for this edge
};

inline nlohmann::json alarm_to_json(const Alarm& a) {
    return {{"ts", a.ts},
            {"uuid", a.event_uuid},
            {"alarm", to_string(a.type)},
            {"subj", {{"id", a.subj_id}, {"feature", a.subj_feature}}},
            {"obj", {{"id", a.obj_id}, {"feature", a.obj_feature}}},
            {"f", a.f},
            {"tag", a.tag},
            {"thr", a.thr}};
}

/// ∂f/∂thr_e for the detection function f(e) = tag − thr_e.
inline constexpr double threshold_gradient() { return -1.0; }

/// Hashed record of every data-dependent branch a replay takes: min/max
/// selections, subject classifications, alarm row matches and f signs.
/// Two replays of one trace diverge in branch structure iff their hashes
/// differ; the finite-difference oracle uses this to skip kink crossings.
class BranchTrace {
  public:
    void record(uint8_t b) {
        h_ ^= b;
        h_ *= 1099511628211ull;
        ++n_;
    }
    uint64_t hash() const { return h_; }
    size_t count() const { return n_; }

  private:
    uint64_t h_ = 1469598103934665603ull;
    size_t n_ = 0;
};

/// Training-time accumulator: Σ event losses and their gradients w.r.t.
/// every parameter, gathered at alarm time from the subject's maps.
struct LossAccum {
    LossGrads* grads = nullptr;

    void on_false_alarm(double f, const ProvNode& subj, uint32_t edge_id) {
        const double dLdf = -2.0 * (1.0 - f);
        grads->event_loss_sum += (1.0 - f) * (1.0 - f) - 1.0;
        grads->loss_events += 1;
        grads->t[edge_id] += dLdf * threshold_gradient();
        for (const auto& [k, v] : subj.gi_a.entries()) grads->a[k] += dLdf * v;
        for (const auto& [k, v] : subj.gi_g.entries()) grads->g[k] += dLdf * v;
    }
};

struct EngineOptions {
    bool track_gradients = false;
    double prune_eps = kDefaultPruneEps;
    bool record_adjacency = false;
};

struct EngineStats {
    uint64_t events = 0;
    uint64_t alarms = 0;
    uint64_t alarm_events = 0;
    uint64_t noop_propagations = 0;  // event types with no table row
};

struct TagUpdate {
    uint32_t node_idx;
    TagScalar scalar;
    double old_value;
    double new_value;
};

/// Streaming detection engine: consumes one event at a time, maintains the
/// provenance graph, propagates tags per the rule table blended by the
/// per-edge rate g_e, and emits alarms. With track_gradients on it also
/// maintains the per-node gradient maps of the differentiable framework.
class Engine {
  public:
    using AlarmSink = std::function<void(const Alarm&)>;

    Engine(FeatureInterner& feats, EdgeInterner& edges, const ParamStore& params,
           const RuleConfig& rc, EngineOptions opts = {})
        : feats_(feats), edges_(edges), params_(params), rc_(rc), opts_(opts), graph_(feats) {
        if (opts_.record_adjacency) graph_.enable_adjacency();
    }

    AlarmSink sink;              // optional: called for every alarm
    LossAccum* loss = nullptr;   // optional: training accumulation
    BranchTrace* branches = nullptr;

    ProvGraph& graph() { return graph_; }
    const ProvGraph& graph() const { return graph_; }
    const EngineStats& stats() const { return stats_; }
    const std::vector<TagUpdate>& last_updates() const { return updates_; }
    const RuleConfig& rules() const { return rc_; }

    /// Classification rule: code tag below 0.5 means the process itself is
    /// suspect; trusted code holding tainted data is a suspect environment.
    static SubjectType classify_subject(double ptag, double itag) {
        if (ptag < 0.5) return SubjectType::Suspect;
        if (itag < 0.5) return SubjectType::SuspectEnv;
        return SubjectType::Benign;
    }

    void process(const Event& e) {
        ++stats_.events;
        updates_.clear();

        const uint32_t si = upsert_subject(e.subj);
        const uint32_t oi = upsert_object(e, si);
        graph_.record_edge(si, oi);

        ProvNode& subj = graph_.node(si);
        subj.stype = classify_subject(subj.p, subj.i);
        record(static_cast<uint8_t>(subj.stype));

        const uint32_t edge_id = edges_.intern(subj.feat, e.type, graph_.node(oi).feat);

        // Alarms fire on the tags the event sees, before its own propagation
        // can mask them (exec would reset a benign subject's data tag, inject
        // caps the target's code tag below its own condition).
        check_alarms(e, si, oi, edge_id);

        propagate(e, si, oi, edge_id);

        ProvNode& s = graph_.node(si);
        s.subj_events += 1;
        if (s.subj_events % rc_.decay_period == 0) decay(s);
    }

    /// Periodic decay: integrity drifts back toward the quiescent target but
    /// never decreases (max form). Gradients ride the selected branch.
    void decay(ProvNode& s) {
        if (s.stype == SubjectType::Suspect) {
            record(0);
            return;
        }
        const double d = (s.stype == SubjectType::Benign) ? rc_.d_b : rc_.d_e;
        const double tq = (s.stype == SubjectType::Benign) ? rc_.t_qb : rc_.t_qe;
        const double cand = d * s.i + (1.0 - d) * tq;
        if (cand > s.i) {
            record(1);
            updates_.push_back({s.idx, TagScalar::I, s.i, cand});
            s.i = cand;
            if (opts_.track_gradients) {
                s.gi_a.scale(d, opts_.prune_eps);
                s.gi_g.scale(d, opts_.prune_eps);
            }
        } else {
            record(0);
        }
    }

  private:
    struct Operand {
        double value = 0.0;
        // Source scalar's gradient maps; null for constants.
        const GradMap* ga = nullptr;
        const GradMap* gg = nullptr;
    };

    static Operand constant(double v) { return {v, nullptr, nullptr}; }

    Operand scalar_op(const ProvNode& n, TagScalar s, double shift = 0.0) const {
        Operand op;
        switch (s) {
            case TagScalar::C: op.value = n.c; break;
            case TagScalar::I:
                op.value = n.i;
                op.ga = &n.gi_a;
                op.gg = &n.gi_g;
                break;
            case TagScalar::P:
                op.value = n.p;
                op.ga = &n.gp_a;
                op.gg = &n.gp_g;
                break;
        }
        op.value += shift;
        return op;
    }

    void record(uint8_t b) {
        if (branches) branches->record(b);
    }

    double& scalar_ref(ProvNode& n, TagScalar s) {
        switch (s) {
            case TagScalar::C: return n.c;
            case TagScalar::I: return n.i;
            default: return n.p;
        }
    }

    /// One rule-table cell: tag_rule = min over the operands (first operand
    /// wins ties, and rows place the current tag first), then Eq.-1 blend
    /// new = g_e·tag_rule + (1−g_e)·old, with matching gradient updates.
    void apply_update(ProvNode& target, TagScalar scalar, std::initializer_list<Operand> operands,
                      double g_e, uint32_t edge_id) {
        const Operand* sel = operands.begin();
        uint8_t pick = 0, idx = 0;
        for (const Operand* op = operands.begin(); op != operands.end(); ++op, ++idx) {
            if (op->value < sel->value) {
                sel = op;
                pick = idx;
            }
        }
        if (operands.size() > 1) record(pick);

        double& slot = scalar_ref(target, scalar);
        const double old = slot;
        const double tag_rule = sel->value;
        double next = g_e * tag_rule + (1.0 - g_e) * old;

        if (opts_.track_gradients && scalar != TagScalar::C) {
            GradMap& ta = (scalar == TagScalar::I) ? target.gi_a : target.gp_a;
            GradMap& tg = (scalar == TagScalar::I) ? target.gi_g : target.gp_g;
            static const GradMap kEmpty{};
            ta.blend(g_e, sel->ga ? *sel->ga : kEmpty, 1.0 - g_e, opts_.prune_eps);
            tg.blend(g_e, sel->gg ? *sel->gg : kEmpty, 1.0 - g_e, opts_.prune_eps);
            // Product-rule term of the current edge's own rate.
            tg.add(edge_id, tag_rule - old, opts_.prune_eps);
            if (next < 0.0 || next > 1.0) {
                // Saturation: a clamped scalar stops responding to parameters.
                next = clamp01(next);
                record(2);
                ta.clear();
                tg.clear();
            }
        } else {
            next = clamp01(next);
        }
        updates_.push_back({target.idx, scalar, old, next});
        slot = next;
    }

    uint32_t upsert_subject(const SubjectRef& s) {
        ProvNode& n = graph_.upsert(s.id, EntityKind::Process, node_feature_of(s), params_, rc_,
                                    opts_.track_gradients, opts_.prune_eps);
        return n.idx;
    }

    uint32_t upsert_object(const Event& e, uint32_t subj_idx) {
        const ProvNode* creator = nullptr;
        if (e.obj.kind == EntityKind::Pipe || e.obj.kind == EntityKind::Memory)
            creator = &graph_.node(subj_idx);
        ProvNode& n = graph_.upsert(e.obj.id, e.obj.kind, node_feature_of(e.obj, rc_.granularity),
                                    params_, rc_, opts_.track_gradients, opts_.prune_eps, creator);
        return n.idx;
    }

    void propagate(const Event& e, uint32_t si, uint32_t oi, uint32_t edge_id) {
        ProvNode& s = graph_.node(si);
        ProvNode& x = graph_.node(oi);
        const double g_e = params_.g_of(edge_id);
        const SubjectType st = s.stype;

        switch (e.type) {
            case EventType::Create:
                // A connect (create on a socket) does not overwrite the
                // remote endpoint's initialized tag: the peer is not a
                // product of the local process.
                if (x.kind == EntityKind::Socket) {
                    ++stats_.noop_propagations;
                    break;
                }
                apply_update(x, TagScalar::C, {scalar_op(s, TagScalar::C)}, g_e, edge_id);
                apply_update(x, TagScalar::I, {scalar_op(s, TagScalar::I)}, g_e, edge_id);
                break;
            case EventType::Read:
                apply_update(s, TagScalar::C, {scalar_op(s, TagScalar::C), scalar_op(x, TagScalar::C)},
                             g_e, edge_id);
                apply_update(s, TagScalar::I, {scalar_op(s, TagScalar::I), scalar_op(x, TagScalar::I)},
                             g_e, edge_id);
                break;
            case EventType::Write: {
                const double shift = (st == SubjectType::Benign) ? rc_.a_b
                                     : (st == SubjectType::Suspect) ? 0.0
                                                                    : rc_.a_e;
                apply_update(x, TagScalar::C,
                             {scalar_op(x, TagScalar::C), scalar_op(s, TagScalar::C, shift)}, g_e,
                             edge_id);
                apply_update(x, TagScalar::I,
                             {scalar_op(x, TagScalar::I), scalar_op(s, TagScalar::I, shift)}, g_e,
                             edge_id);
                break;
            }
            case EventType::Load:
                apply_update(s, TagScalar::P, {scalar_op(s, TagScalar::P), scalar_op(x, TagScalar::I)},
                             g_e, edge_id);
                apply_update(s, TagScalar::C, {scalar_op(s, TagScalar::C), scalar_op(x, TagScalar::C)},
                             g_e, edge_id);
                apply_update(s, TagScalar::I, {scalar_op(s, TagScalar::I), scalar_op(x, TagScalar::I)},
                             g_e, edge_id);
                break;
            case EventType::Exec:
                if (st == SubjectType::Suspect)
                    apply_update(s, TagScalar::P,
                                 {scalar_op(x, TagScalar::I), constant(rc_.susp_env)}, g_e, edge_id);
                else
                    apply_update(s, TagScalar::P, {scalar_op(x, TagScalar::I)}, g_e, edge_id);
                if (st == SubjectType::Benign) {
                    apply_update(s, TagScalar::C, {constant(1.0)}, g_e, edge_id);
                    apply_update(s, TagScalar::I, {constant(1.0)}, g_e, edge_id);
                } else {
                    apply_update(s, TagScalar::C,
                                 {scalar_op(s, TagScalar::C), scalar_op(x, TagScalar::C)}, g_e, edge_id);
                    apply_update(s, TagScalar::I,
                                 {scalar_op(s, TagScalar::I), scalar_op(x, TagScalar::I)}, g_e, edge_id);
                }
                break;
            case EventType::Inject:
                apply_update(x, TagScalar::P, {scalar_op(x, TagScalar::P), scalar_op(s, TagScalar::I)},
                             g_e, edge_id);
                apply_update(x, TagScalar::C, {scalar_op(x, TagScalar::C), scalar_op(s, TagScalar::C)},
                             g_e, edge_id);
                apply_update(x, TagScalar::I, {scalar_op(x, TagScalar::I), scalar_op(s, TagScalar::I)},
                             g_e, edge_id);
                break;
            default:
                // mmap/mprotect/chmod/mv/rm/clone/setuid have no table row.
                ++stats_.noop_propagations;
                break;
        }
    }

    void check_alarms(const Event& e, uint32_t si, uint32_t oi, uint32_t edge_id) {
        const ProvNode& s = graph_.node(si);
        const ProvNode& x = graph_.node(oi);

        uint8_t mask = 0;
        auto row = [&](AlarmType t) { mask |= static_cast<uint8_t>(1u << static_cast<unsigned>(t)); };

        switch (e.type) {
            case EventType::Mmap:
            case EventType::Mprotect:
                if (e.perm_has_exec()) row(AlarmType::MemExec);
                break;
            case EventType::Exec:
            case EventType::Load:
                if (s.p > 0.5) row(AlarmType::FileExec);
                break;
            case EventType::Inject:
                if (x.p > 0.5) row(AlarmType::Inject);
                break;
            case EventType::Chmod:
                if (e.perm_has_exec()) row(AlarmType::ChPerm);
                break;
            case EventType::Write:
                if (x.kind == EntityKind::File) row(AlarmType::Corrupt);
                if (s.c < 0.5 && x.kind == EntityKind::Socket) row(AlarmType::DataLeak);
                break;
            case EventType::Mv:
            case EventType::Rm:
                if (x.kind == EntityKind::File) row(AlarmType::Corrupt);
                break;
            case EventType::Create:
                if (x.kind == EntityKind::File) row(AlarmType::MalFileCreation);
                break;
            default:
                break;
        }
        if (e.new_uid && *e.new_uid != e.subj.uid) row(AlarmType::Escalate);
        if (mask == 0) return;

        const double thr = params_.t_of(edge_id);
        const double f = s.i - thr;
        record(mask);
        record(f < 0.0 ? 1 : 0);
        if (f >= 0.0) return;

        ++stats_.alarm_events;
        if (loss) loss->on_false_alarm(f, s, edge_id);
        for (unsigned t = 0; t < 8; ++t) {
            if (!(mask & (1u << t))) continue;
            ++stats_.alarms;
            if (!sink) continue;
            Alarm a;
            a.ts = e.ts;
            a.event_uuid = e.uuid;
            a.type = static_cast<AlarmType>(t);
            a.subj_id = s.id;
            a.subj_feature = feats_.str(s.feat);
            a.obj_id = x.id;
            a.obj_feature = feats_.str(x.feat);
            a.f = f;
            a.tag = s.i;
            a.thr = thr;
            sink(a);
        }
    }

    FeatureInterner& feats_;
    EdgeInterner& edges_;
    const ParamStore& params_;
    const RuleConfig& rc_;
    EngineOptions opts_;
    ProvGraph graph_;
    EngineStats stats_;
    std::vector<TagUpdate> updates_;
};

}  // namespace provtag
