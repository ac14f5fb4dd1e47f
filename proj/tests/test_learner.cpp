#include <doctest.h>

#include <sstream>

#include "helpers.hpp"

using namespace provtag;
using namespace testutil;

TEST_CASE("event loss: max(0, (1-f)^2 - 1)") {
    CHECK(event_loss(-0.5) == doctest::Approx(1.25));
    CHECK(event_loss(0.2) == 0.0);
    CHECK(event_loss(0.0) == 0.0);
}

TEST_CASE("total loss: event term plus quadratic pull toward defaults") {
    FeatureInterner feats;
    ParamStore params;
    RegularizerCoefs coefs{1.0, 2.0, 3.0};
    TunedSubsets all;
    CHECK(total_loss(0.0, params, feats, coefs, all) == 0.0);
    CHECK(total_loss(1.25, params, feats, coefs, all) == doctest::Approx(1.25));

    params.g[0] = kDefaultG0 - 0.1;  // one entry moved by δ=0.1
    CHECK(total_loss(0.0, params, feats, coefs, all) == doctest::Approx(0.5 * 2.0 * 0.01));

    // Untuned families contribute nothing.
    TunedSubsets only_t = TunedSubsets::parse("T");
    CHECK(total_loss(0.0, params, feats, coefs, only_t) == 0.0);
}

TEST_CASE("alarm-time accumulation implements the chain rule") {
    FeatureInterner feats;
    LossGrads grads;
    LossAccum accum;
    accum.grads = &grads;

    ProvNode subj;
    uint32_t a_key = feats.intern("sock:1.1.1.1");
    subj.gi_a.set(a_key, 0.5, kDefaultPruneEps);
    accum.on_false_alarm(-0.5, subj, /*edge=*/7);

    // dL/df = -2(1-f) = -3; df/da = 0.5 → -1.5
    CHECK(grads.a[a_key] == doctest::Approx(-1.5));
    // df/dthr = -1 → +3: the update direction lowers the threshold.
    CHECK(grads.t[7] == doctest::Approx(3.0));
    CHECK(grads.t[7] > 0.0);
    CHECK(grads.event_loss_sum == doctest::Approx(1.25));
    CHECK(grads.loss_events == 1);
}

TEST_CASE("backward with no loss-active events and default params is zero") {
    FeatureInterner feats;
    ParamStore params;
    LossGrads empty;
    EpochGradients eg = backward(empty, params, feats, {1, 1, 1}, {});
    CHECK(eg.a.empty());
    CHECK(eg.g.empty());
    CHECK(eg.t.empty());
}

TEST_CASE("projected step") {
    FeatureInterner feats;
    ParamStore params;
    uint32_t k = 3;
    params.t[k] = 0.5;
    EpochGradients grads;

    SUBCASE("basic update: 0.5 - 0.01*2 = 0.48") {
        grads.t[k] = 2.0;
        step(params, grads, 0.01, feats);
        CHECK(params.t[k] == doctest::Approx(0.48));
    }
    SUBCASE("zero gradient is a fixed point") {
        grads.t[k] = 0.0;
        step(params, grads, 0.01, feats);
        CHECK(params.t[k] == 0.5);
    }
    SUBCASE("projection clamps at the boundary") {
        params.t[k] = 0.005;
        grads.t[k] = 1.0;
        step(params, grads, 0.01, feats);
        CHECK(params.t[k] == 0.0);
    }
}

TEST_CASE("heuristic regularizer coefficients") {
    RegularizerCoefs c = heuristic_coefficients(1, 1);
    CHECK(c.alpha == 3.0);
    CHECK(c.gamma == 3.0);
    CHECK(c.tau == 12.0);
    c = heuristic_coefficients(10, 10);
    CHECK(c.alpha == 30.0);
    CHECK(c.gamma == 30.0);
    CHECK(c.tau == 120.0);
    CHECK_THROWS_AS(heuristic_coefficients(0, 1), ConfigError);
}

namespace {
/// Tiny trace with guaranteed false alarms: a proc tainted by a socket
/// writes the same files over and over.
std::vector<Event> fa_trace(size_t sessions) {
    std::vector<Event> out;
    for (size_t k = 0; k < sessions; ++k) {
        std::string pid = "p" + std::to_string(k);
        out.push_back(ev(EventType::Create, pid, "app", sock_obj("s" + std::to_string(k), "7.7.7.7")));
        out.push_back(ev(EventType::Read, pid, "app", sock_obj("s" + std::to_string(k), "7.7.7.7")));
        out.push_back(ev(EventType::Write, pid, "app", file_obj("/cache/c" + std::to_string(k % 3))));
    }
    return out;
}

std::vector<Event> quiet_trace(size_t n) {
    std::vector<Event> out;
    for (size_t k = 0; k < n; ++k) {
        out.push_back(ev(EventType::Read, "p0", "calm", file_obj("/data/in")));
        out.push_back(ev(EventType::Write, "p0", "calm", file_obj("/data/out")));
    }
    return out;
}
}  // namespace

TEST_CASE("training on an alarm-free trace is a fixed point at defaults") {
    FeatureInterner feats;
    EdgeInterner edges;
    RuleConfig rc;
    TrainConfig cfg;
    cfg.epochs = 5;
    std::vector<std::vector<Event>> traces{quiet_trace(20)};
    TrainResult r = train(traces, cfg, rc, feats, edges);
    CHECK(r.params.at_defaults());
    for (const auto& e : r.epochs) CHECK(e.loss == 0.0);
}

TEST_CASE("huge regularizers pin every parameter to its default") {
    FeatureInterner feats;
    EdgeInterner edges;
    RuleConfig rc;
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.coefs = {1e6, 1e6, 1e6};
    cfg.lr = 1e-6;  // plain GD needs lr·coef <= 1 to stay stable
    cfg.convergence_eps = 0.0;
    std::vector<std::vector<Event>> traces{fa_trace(10)};
    TrainResult r = train(traces, cfg, rc, feats, edges);
    for (const auto& [k, v] : r.params.a)
        CHECK(std::fabs(v - a_default_for_feature(feats.str(k))) <= 1e-3);
    for (const auto& [k, v] : r.params.g) CHECK(std::fabs(v - kDefaultG0) <= 1e-3);
    for (const auto& [k, v] : r.params.t) CHECK(std::fabs(v - kDefaultT0) <= 1e-3);
}

TEST_CASE("training reduces the loss on a false-alarm workload") {
    FeatureInterner feats;
    EdgeInterner edges;
    RuleConfig rc;
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.lr = 0.01;
    cfg.coefs = heuristic_coefficients(1, 1);
    std::vector<std::vector<Event>> traces{fa_trace(30)};
    TrainResult r = train(traces, cfg, rc, feats, edges);
    REQUIRE(r.epochs.size() >= 2);
    CHECK(r.epochs.back().loss < r.epochs.front().loss);
}

TEST_CASE("tuning {T} alone never touches A or G") {
    FeatureInterner feats;
    EdgeInterner edges;
    RuleConfig rc;
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.tuned = TunedSubsets::parse("T");
    std::vector<std::vector<Event>> traces{fa_trace(10)};
    TrainResult r = train(traces, cfg, rc, feats, edges);
    CHECK(r.params.a.empty());
    CHECK(r.params.g.empty());
    CHECK(!r.params.t.empty());
}

TEST_CASE("with an empty tuned set, detect-after-train equals detect-at-defaults") {
    FeatureInterner feats;
    EdgeInterner edges;
    RuleConfig rc;
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.tuned = TunedSubsets::none();
    auto events = fa_trace(10);
    std::vector<std::vector<Event>> traces{events};
    TrainResult r = train(traces, cfg, rc, feats, edges);
    CHECK(r.params.at_defaults());
    auto trained = detect(events, r.params, rc, feats, edges);
    ParamStore defaults;
    auto baseline = detect(events, defaults, rc, feats, edges);
    REQUIRE(trained.size() == baseline.size());
    for (size_t i = 0; i < trained.size(); ++i) {
        CHECK(trained[i].event_uuid == baseline[i].event_uuid);
        CHECK(trained[i].f == baseline[i].f);
    }
}

TEST_CASE("without loss-active events every tuned entry contracts toward its default") {
    FeatureInterner feats;
    EdgeInterner edges;
    RuleConfig rc;
    ParamStore params;
    uint32_t a_key = feats.intern("sock:1.1.1.1");
    uint32_t e_key = edges.intern(feats.intern("proc:x"), EventType::Read, a_key);
    params.a[a_key] = 0.7;  // default 0
    params.g[e_key] = 0.4;  // default 1
    params.t[e_key] = 0.2;  // default 0.5

    std::vector<std::vector<Event>> traces{quiet_trace(5)};
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.coefs = {1.0, 1.0, 1.0};
    cfg.lr = 0.1;
    TrainResult r = train(traces, cfg, rc, feats, edges, nullptr, nullptr, params);
    CHECK(std::fabs(r.params.a[a_key] - 0.0) < 0.7);
    CHECK(std::fabs(r.params.g[e_key] - 1.0) < 0.6);
    CHECK(std::fabs(r.params.t[e_key] - 0.5) < 0.3);
}

TEST_CASE("labeled-malicious events in training raise the assumption warning") {
    FeatureInterner feats;
    EdgeInterner edges;
    RuleConfig rc;
    auto events = fa_trace(3);
    Labels labels;
    labels.malicious_events.insert(events[1].uuid);
    std::string warned;
    TrainConfig cfg;
    cfg.epochs = 1;
    std::vector<std::vector<Event>> traces{events};
    TrainResult r =
        train(traces, cfg, rc, feats, edges, &labels, [&](const std::string& m) { warned = m; });
    CHECK(r.warnings == 1);
    CHECK(!warned.empty());
}

TEST_CASE("time-series cross-validation slides ordered windows") {
    FeatureInterner feats;
    EdgeInterner edges;
    RuleConfig rc;
    TrainConfig cfg;
    cfg.epochs = 3;
    auto events = fa_trace(30);  // 90 events

    SUBCASE("k=3 with 2/3 windows covers the trace with overlap") {
        auto folds = time_series_cv(events, 3, 2.0 / 3.0, cfg, rc, feats, edges);
        REQUIRE(folds.size() == 3);
        CHECK(folds[0].window_begin == 0);
        CHECK(folds[2].window_end == events.size());
        CHECK(folds[1].window_begin > folds[0].window_begin);
        CHECK(folds[1].window_begin < folds[0].window_end);  // overlapping
        size_t selected = 0;
        for (const auto& f : folds) selected += f.selected ? 1 : 0;
        CHECK(selected == 1);
    }
    SUBCASE("k=1 degenerates to plain training") {
        auto folds = time_series_cv(events, 1, 1.0, cfg, rc, feats, edges);
        REQUIRE(folds.size() == 1);
        CHECK(folds[0].window_begin == 0);
        CHECK(folds[0].window_end == events.size());
        CHECK(folds[0].selected);
    }
    SUBCASE("window longer than the trace is a config error") {
        CHECK_THROWS_AS(time_series_cv(events, 2, 1.5, cfg, rc, feats, edges), ConfigError);
    }
}

TEST_CASE("shuffled timestamps are rejected by the ordering invariant") {
    auto events = fa_trace(3);
    std::swap(events[0].ts, events.back().ts);
    std::stringstream buf;
    for (const auto& e : events) buf << event_to_line(e) << '\n';
    CHECK_THROWS_AS(read_trace(buf), ParseError);
}

TEST_CASE("subset parsing") {
    TunedSubsets s = TunedSubsets::parse("A,T");
    CHECK(s.a);
    CHECK(!s.g);
    CHECK(s.t);
    CHECK(s.str() == "A,T");
    CHECK_THROWS_AS(TunedSubsets::parse("A,Q"), ConfigError);
}
