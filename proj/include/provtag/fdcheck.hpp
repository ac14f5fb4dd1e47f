#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "provtag/engine.hpp"
#include "provtag/learner.hpp"

namespace provtag {

enum class ParamFamily : uint8_t { A, G, T };

inline char family_letter(ParamFamily f) {
    switch (f) {
        case ParamFamily::A: return 'A';
        case ParamFamily::G: return 'G';
        case ParamFamily::T: return 'T';
    }
    return '?';
}

struct ReplayOutcome {
    double total_loss = 0.0;
    double event_loss_sum = 0.0;
    size_t loss_events = 0;
    uint64_t branch_hash = 0;
    size_t branch_count = 0;
};

/// One deterministic replay under fixed parameters, returning the full
/// training loss (event term + regularizer over tuned families) and the
/// branch signature of every data-dependent decision taken.
inline ReplayOutcome replay_total_loss(const std::vector<Event>& events, FeatureInterner& feats,
                                       EdgeInterner& edges, const ParamStore& params,
                                       const RuleConfig& rc, const RegularizerCoefs& coefs,
                                       const TunedSubsets& tuned, double prune_eps,
                                       bool with_gradients = false, LossGrads* grads_out = nullptr) {
    LossGrads grads;
    EngineOptions opts;
    opts.track_gradients = with_gradients;
    opts.prune_eps = prune_eps;
    Engine engine(feats, edges, params, rc, opts);
    LossAccum accum;
    accum.grads = &grads;
    engine.loss = &accum;
    BranchTrace bt;
    engine.branches = &bt;
    for (const Event& e : events) engine.process(e);

    ReplayOutcome out;
    out.event_loss_sum = grads.event_loss_sum;
    out.loss_events = grads.loss_events;
    out.total_loss = total_loss(grads.event_loss_sum, params, feats, coefs, tuned);
    out.branch_hash = bt.hash();
    out.branch_count = bt.count();
    if (grads_out) *grads_out = std::move(grads);
    return out;
}

struct FdCheck {
    ParamFamily family = ParamFamily::A;
    uint32_t key = 0;
    std::string key_str;
    double base = 0.0;  // operating point of the checked parameter
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
    bool excluded = false;  // a min/max/clamp/alarm branch flipped within ±h
    bool pass = false;
};

namespace detail {

inline void set_param(ParamStore& p, ParamFamily f, uint32_t key, double value) {
    switch (f) {
        case ParamFamily::A: p.a[key] = value; break;
        case ParamFamily::G: p.g[key] = value; break;
        case ParamFamily::T: p.t[key] = value; break;
    }
}

inline double default_of(ParamFamily f, uint32_t key, const FeatureInterner& feats) {
    switch (f) {
        case ParamFamily::A: return a_default_for_feature(feats.str(key));
        case ParamFamily::G: return kDefaultG0;
        default: return kDefaultT0;
    }
}

inline double coef_of(ParamFamily f, const RegularizerCoefs& c, const TunedSubsets& tuned) {
    switch (f) {
        case ParamFamily::A: return tuned.a ? c.alpha : 0.0;
        case ParamFamily::G: return tuned.g ? c.gamma : 0.0;
        default: return tuned.t ? c.tau : 0.0;
    }
}

inline double event_grad_of(const LossGrads& g, ParamFamily f, uint32_t key) {
    const std::map<uint32_t, double>& m =
        (f == ParamFamily::A) ? g.a : (f == ParamFamily::G) ? g.g : g.t;
    auto it = m.find(key);
    return it == m.end() ? 0.0 : it->second;
}

}  // namespace detail

/// Central finite-difference check of one parameter at one operating point:
/// two full deterministic replays at p±h against the analytically accumulated
/// gradient. Replays whose branch structure differs are reported as excluded
/// (the loss has a kink inside the window; the comparison is meaningless).
inline FdCheck finite_difference_check(const std::vector<Event>& events, FeatureInterner& feats,
                                       EdgeInterner& edges, const ParamStore& base_params,
                                       const RuleConfig& rc, ParamFamily family, uint32_t key,
                                       double base, double h, const RegularizerCoefs& coefs,
                                       const TunedSubsets& tuned, double prune_eps = kDefaultPruneEps,
                                       double tol = 1e-3, double abs_floor = 1e-6) {
    if (h <= 0.0 || h > 0.01) throw ConfigError("fd step h must lie in (0, 0.01]");
    if (base - h < 0.0 || base + h > 1.0)
        throw ConfigError("fd check requires the perturbed parameter to stay inside [0,1]");

    FdCheck out;
    out.family = family;
    out.key = key;
    out.base = base;

    ParamStore at_base = base_params;
    detail::set_param(at_base, family, key, base);
    LossGrads grads;
    ReplayOutcome nominal =
        replay_total_loss(events, feats, edges, at_base, rc, coefs, tuned, prune_eps, true, &grads);
    out.analytic = detail::event_grad_of(grads, family, key) +
                   detail::coef_of(family, coefs, tuned) *
                       (base - detail::default_of(family, key, feats));

    ParamStore plus = base_params, minus = base_params;
    detail::set_param(plus, family, key, base + h);
    detail::set_param(minus, family, key, base - h);
    ReplayOutcome up = replay_total_loss(events, feats, edges, plus, rc, coefs, tuned, prune_eps);
    ReplayOutcome dn = replay_total_loss(events, feats, edges, minus, rc, coefs, tuned, prune_eps);

    out.numeric = (up.total_loss - dn.total_loss) / (2.0 * h);
    out.excluded = up.branch_hash != dn.branch_hash || up.branch_count != dn.branch_count ||
                   up.branch_hash != nominal.branch_hash;
    const double diff = std::fabs(out.analytic - out.numeric);
    out.rel_err = diff / std::max({std::fabs(out.analytic), std::fabs(out.numeric), 1e-9});
    out.pass = out.excluded || diff <= abs_floor || out.rel_err <= tol;
    return out;
}

struct GradCheckConfig {
    size_t samples = 200;  // target number of non-excluded checks, split across families
    double h = 1e-4;
    uint64_t seed = 7;
    RegularizerCoefs coefs;
    TunedSubsets tuned;  // defaults to all three families
    double tol = 1e-3;
    double abs_floor = 1e-6;
    double prune_eps = kDefaultPruneEps;
    bool randomize_base = true;  // draw operating points from U[0.2,0.8]
};

struct GradCheckReport {
    std::vector<FdCheck> checks;
    size_t excluded = 0;
    size_t failed = 0;

    bool all_passed() const { return failed == 0; }
};

/// Samples parameters from all three families and runs the oracle on each.
/// A replay-determinism self-test runs first: the same trace replayed twice
/// must produce bit-identical loss and branch signature.
inline GradCheckReport gradcheck(const std::vector<Event>& events, const RuleConfig& rc,
                                 const GradCheckConfig& gc, FeatureInterner& feats,
                                 EdgeInterner& edges, const ParamStore& base_params = {}) {
    ReplayOutcome r1 = replay_total_loss(events, feats, edges, base_params, rc, gc.coefs, gc.tuned,
                                         gc.prune_eps, true);
    ReplayOutcome r2 = replay_total_loss(events, feats, edges, base_params, rc, gc.coefs, gc.tuned,
                                         gc.prune_eps, true);
    if (r1.total_loss != r2.total_loss || r1.branch_hash != r2.branch_hash ||
        r1.branch_count != r2.branch_count)
        throw std::runtime_error("replay nondeterminism detected: identical replays diverged");

    // Candidate pools: A keys are the features of non-process nodes actually
    // created; G/T keys are the edges actually seen.
    std::vector<uint32_t> a_keys;
    {
        EngineOptions opts;
        opts.prune_eps = gc.prune_eps;
        Engine probe(feats, edges, base_params, rc, opts);
        for (const Event& e : events) probe.process(e);
        std::set<uint32_t> seen;
        for (const ProvNode& n : probe.graph().nodes())
            if (n.kind == EntityKind::Socket || n.kind == EntityKind::File) seen.insert(n.feat);
        a_keys.assign(seen.begin(), seen.end());
    }
    std::vector<uint32_t> edge_keys(edges.size());
    for (uint32_t i = 0; i < edges.size(); ++i) edge_keys[i] = i;

    GradCheckReport report;
    if (a_keys.empty() && edge_keys.empty()) return report;

    std::mt19937_64 rng(gc.seed);
    std::uniform_real_distribution<double> base_dist(0.2, 0.8);
    const size_t per_family = std::max<size_t>(1, gc.samples / 3);
    const ParamFamily fams[3] = {ParamFamily::A, ParamFamily::G, ParamFamily::T};

    for (ParamFamily fam : fams) {
        const std::vector<uint32_t>& pool = (fam == ParamFamily::A) ? a_keys : edge_keys;
        if (pool.empty()) continue;
        size_t accepted = 0, attempts = 0;
        const size_t max_attempts = per_family * 20;
        while (accepted < per_family && attempts < max_attempts) {
            ++attempts;
            const uint32_t key = pool[rng() % pool.size()];
            double base = gc.randomize_base ? base_dist(rng)
                                            : detail::default_of(fam, key, feats);
            base = std::min(1.0 - gc.h, std::max(gc.h, base));
            FdCheck check = finite_difference_check(events, feats, edges, base_params, rc, fam, key,
                                                    base, gc.h, gc.coefs, gc.tuned, gc.prune_eps,
                                                    gc.tol, gc.abs_floor);
            check.key_str = (fam == ParamFamily::A) ? feats.str(key) : edges.str(key, feats);
            if (check.excluded) {
                ++report.excluded;
                report.checks.push_back(std::move(check));
                continue;
            }
            if (!check.pass) ++report.failed;
            report.checks.push_back(std::move(check));
            ++accepted;
        }
    }
    return report;
}

inline void write_gradcheck_csv(std::ostream& out, const GradCheckReport& report) {
    out << "param_kind,key,base,analytic,numeric,rel_err,status\n";
    for (const FdCheck& c : report.checks) {
        out << family_letter(c.family) << ',' << '"';
        for (char ch : c.key_str) {
            if (ch == '"') out << '"';
            out << ch;
        }
        out << '"' << ',' << c.base << ',' << c.analytic << ',' << c.numeric << ',' << c.rel_err
            << ',' << (c.excluded ? "excluded" : (c.pass ? "pass" : "FAIL")) << '\n';
    }
}

}  // namespace provtag
