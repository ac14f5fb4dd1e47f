#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "provtag/engine.hpp"
#include "provtag/event.hpp"
#include "provtag/labels.hpp"
#include "provtag/params.hpp"

namespace provtag {

/// Per-event detection loss. Only misclassified events contribute: benign
/// events (y=+1) that alarmed (f<0), and, symmetrically, malicious events
/// that did not.
inline double event_loss(double f, int y = +1) {
    const double d = static_cast<double>(y) - f;
    return std::max(0.0, d * d - 1.0);
}

struct RegularizerCoefs {
    double alpha = 0.0;  // A family
    double gamma = 0.0;  // G family
    double tau = 0.0;    // T family
};

/// Heuristic coefficients from the tolerated false-alarm budget:
/// alpha ≈ 3·N(node), gamma ≈ 3·N(edge), tau ≈ 12·N(edge).
inline RegularizerCoefs heuristic_coefficients(int n_node, int n_edge) {
    if (n_node < 1 || n_edge < 1)
        throw ConfigError("heuristic coefficients need at least one tolerated false alarm per node/edge");
    return {3.0 * n_node, 3.0 * n_edge, 12.0 * n_edge};
}

/// Regularizer value: (coef/2)·Σ(p−p0)² per tuned family, whose entry-wise
/// derivative is coef·(p−p0). Entries still at their default contribute 0.
inline double regularizer_loss(const ParamStore& params, const FeatureInterner& feats,
                               const RegularizerCoefs& coefs, const TunedSubsets& tuned) {
    double sum = 0.0;
    if (tuned.a)
        for (const auto& [k, v] : params.a) {
            const double d = v - a_default_for_feature(feats.str(k));
            sum += 0.5 * coefs.alpha * d * d;
        }
    if (tuned.g)
        for (const auto& [k, v] : params.g) {
            const double d = v - kDefaultG0;
            sum += 0.5 * coefs.gamma * d * d;
        }
    if (tuned.t)
        for (const auto& [k, v] : params.t) {
            const double d = v - kDefaultT0;
            sum += 0.5 * coefs.tau * d * d;
        }
    return sum;
}

inline double total_loss(double event_loss_sum, const ParamStore& params, const FeatureInterner& feats,
                         const RegularizerCoefs& coefs, const TunedSubsets& tuned) {
    return event_loss_sum + regularizer_loss(params, feats, coefs, tuned);
}

/// Full per-family gradients for one epoch: the event term accumulated during
/// the replay plus the entry-wise regularizer pull on every materialized
/// entry. Families outside the tuned subset get no gradient at all.
struct EpochGradients {
    std::map<uint32_t, double> a, g, t;
};

inline EpochGradients backward(const LossGrads& event_grads, const ParamStore& params,
                               const FeatureInterner& feats, const RegularizerCoefs& coefs,
                               const TunedSubsets& tuned) {
    EpochGradients out;
    if (tuned.a) {
        out.a = event_grads.a;
        for (const auto& [k, v] : params.a)
            out.a[k] += coefs.alpha * (v - a_default_for_feature(feats.str(k)));
    }
    if (tuned.g) {
        out.g = event_grads.g;
        for (const auto& [k, v] : params.g) out.g[k] += coefs.gamma * (v - kDefaultG0);
    }
    if (tuned.t) {
        out.t = event_grads.t;
        for (const auto& [k, v] : params.t) out.t[k] += coefs.tau * (v - kDefaultT0);
    }
    return out;
}

/// Projected gradient-descent update: p ← clamp[0,1](p − lr·∂Loss/∂p).
/// Touched entries materialize in the store; untouched families stay put.
inline void step(ParamStore& params, const EpochGradients& grads, double lr,
                 const FeatureInterner& feats) {
    for (const auto& [k, dg] : grads.a) {
        auto it = params.a.find(k);
        const double cur = (it != params.a.end()) ? it->second : a_default_for_feature(feats.str(k));
        const double next = clamp01(cur - lr * dg);
        if (it != params.a.end())
            it->second = next;
        else if (next != cur)
            params.a.emplace(k, next);
    }
    for (const auto& [k, dg] : grads.g) {
        auto it = params.g.find(k);
        const double cur = (it != params.g.end()) ? it->second : kDefaultG0;
        const double next = clamp01(cur - lr * dg);
        if (it != params.g.end())
            it->second = next;
        else if (next != cur)
            params.g.emplace(k, next);
    }
    for (const auto& [k, dg] : grads.t) {
        auto it = params.t.find(k);
        const double cur = (it != params.t.end()) ? it->second : kDefaultT0;
        const double next = clamp01(cur - lr * dg);
        if (it != params.t.end())
            it->second = next;
        else if (next != cur)
            params.t.emplace(k, next);
    }
}

struct TrainConfig {
    double lr = 0.01;
    uint32_t epochs = 20;
    RegularizerCoefs coefs;
    TunedSubsets tuned;
    double convergence_eps = 1e-4;  // relative |Δloss| stop
    double prune_eps = kDefaultPruneEps;
};

struct EpochRecord {
    double loss = 0.0;
    double event_loss = 0.0;
    size_t false_alarm_events = 0;
};

struct TrainResult {
    ParamStore params;
    std::vector<EpochRecord> epochs;
    bool converged = false;
    size_t warnings = 0;  // labeled-malicious events seen in training data
};

/// One forward replay of a trace collection under fixed parameters.
/// Returns the event-loss sum and its gradients in params-independent form.
inline LossGrads replay_for_training(std::span<const std::vector<Event>> traces,
                                     FeatureInterner& feats, EdgeInterner& edges,
                                     const ParamStore& params, const RuleConfig& rc, double prune_eps,
                                     BranchTrace* branches = nullptr) {
    LossGrads grads;
    for (const auto& trace : traces) {
        EngineOptions opts;
        opts.track_gradients = true;
        opts.prune_eps = prune_eps;
        Engine engine(feats, edges, params, rc, opts);
        LossAccum accum;
        accum.grads = &grads;
        engine.loss = &accum;
        engine.branches = branches;
        for (const Event& e : trace) engine.process(e);
    }
    return grads;
}

/// Epoch loop: replay → loss → backward → projected step, from the
/// conservative defaults, until the epoch budget runs out or the loss stops
/// moving. Training data is assumed benign; labeled-malicious events are
/// counted as assumption violations but training proceeds (the poisoning
/// experiments rely on that).
inline TrainResult train(std::span<const std::vector<Event>> traces, const TrainConfig& cfg,
                         const RuleConfig& rc, FeatureInterner& feats, EdgeInterner& edges,
                         const Labels* labels = nullptr,
                         const std::function<void(const std::string&)>& warn = nullptr,
                         ParamStore initial = {}) {
    TrainResult result;
    result.params = std::move(initial);

    if (labels && !labels->malicious_events.empty()) {
        for (const auto& trace : traces)
            for (const Event& e : trace)
                if (labels->event_is_malicious(e.uuid)) ++result.warnings;
        if (result.warnings > 0 && warn)
            warn("training data contains " + std::to_string(result.warnings) +
                 " labeled-malicious events; the benign-training assumption is violated");
    }

    double prev_loss = 0.0;
    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        LossGrads grads =
            replay_for_training(traces, feats, edges, result.params, rc, cfg.prune_eps);
        const double loss =
            total_loss(grads.event_loss_sum, result.params, feats, cfg.coefs, cfg.tuned);
        result.epochs.push_back({loss, grads.event_loss_sum, grads.loss_events});

        EpochGradients eg = backward(grads, result.params, feats, cfg.coefs, cfg.tuned);
        step(result.params, eg, cfg.lr, feats);

        if (epoch > 0 && std::fabs(loss - prev_loss) < cfg.convergence_eps * std::max(1.0, std::fabs(loss))) {
            result.converged = true;
            break;
        }
        prev_loss = loss;
    }
    return result;
}

/// Detection-only replay; returns the number of alarm-triggering events.
inline size_t count_alarm_events(std::span<const Event> events, FeatureInterner& feats,
                                 EdgeInterner& edges, const ParamStore& params, const RuleConfig& rc) {
    Engine engine(feats, edges, params, rc);
    for (const Event& e : events) engine.process(e);
    return engine.stats().alarm_events;
}

struct CvFold {
    size_t window_begin = 0;
    size_t window_end = 0;
    TrainResult result;
    size_t validation_events = 0;
    size_t validation_false_alarms = 0;
    bool selected = false;
};

/// Time-series cross-validation: k training windows of fraction·n events
/// slide forward in chronological order; each fold validates on the events
/// after its window. The fold with the fewest validation false alarms wins.
inline std::vector<CvFold> time_series_cv(const std::vector<Event>& events, uint32_t k,
                                          double window_fraction, const TrainConfig& cfg,
                                          const RuleConfig& rc, FeatureInterner& feats,
                                          EdgeInterner& edges) {
    if (k < 1) throw ConfigError("cv requires k >= 1");
    if (window_fraction <= 0.0 || window_fraction > 1.0)
        throw ConfigError("cv window fraction must lie in (0,1]");
    const size_t n = events.size();
    const size_t w = static_cast<size_t>(std::llround(window_fraction * static_cast<double>(n)));
    if (w < 1 || w > n) throw ConfigError("cv window longer than trace (or empty)");

    std::vector<CvFold> folds;
    for (uint32_t fold = 0; fold < k; ++fold) {
        size_t begin = (k == 1) ? 0 : (fold * (n - w)) / (k - 1);
        CvFold cv;
        cv.window_begin = begin;
        cv.window_end = begin + w;
        std::vector<std::vector<Event>> window(1);
        window[0].assign(events.begin() + static_cast<ptrdiff_t>(begin),
                         events.begin() + static_cast<ptrdiff_t>(begin + w));
        cv.result = train(window, cfg, rc, feats, edges);
        cv.validation_events = n - cv.window_end;
        if (cv.validation_events > 0)
            cv.validation_false_alarms =
                count_alarm_events(std::span(events).subspan(cv.window_end), feats, edges,
                                   cv.result.params, rc);
        folds.push_back(std::move(cv));
    }

    // Prefer folds with real validation data; ties go to the earliest fold.
    size_t best = folds.size();
    for (size_t i = 0; i < folds.size(); ++i) {
        if (folds[i].validation_events == 0) continue;
        if (best == folds.size() || folds[i].validation_false_alarms < folds[best].validation_false_alarms)
            best = i;
    }
    if (best == folds.size()) best = 0;
    folds[best].selected = true;
    return folds;
}

}  // namespace provtag
