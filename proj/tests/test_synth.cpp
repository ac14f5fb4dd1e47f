#include <doctest.h>

#include <set>
#include <sstream>

#include "helpers.hpp"

using namespace provtag;
using namespace testutil;

namespace {
std::string serialize(const std::vector<Event>& events) {
    std::ostringstream out;
    for (const auto& e : events) out << event_to_line(e) << '\n';
    return out.str();
}
}  // namespace

TEST_CASE("identical seeds give byte-identical traces") {
    ScenarioConfig cfg;
    cfg.name = "grey_nodes";
    cfg.seed = 42;
    cfg.benign_events = 600;
    GeneratedTrace a = generate(cfg);
    GeneratedTrace b = generate(cfg);
    CHECK(serialize(a.events) == serialize(b.events));
    CHECK(labels_to_json(a.labels).dump() == labels_to_json(b.labels).dump());
    CHECK(a.train_end == b.train_end);

    cfg.seed = 43;
    GeneratedTrace c = generate(cfg);
    CHECK(serialize(a.events) != serialize(c.events));
}

TEST_CASE("labels mark exactly the injected kill chain") {
    for (const char* name : {"grey_nodes", "dependency_explosion", "custom_alarm", "poisoning"}) {
        ScenarioConfig cfg;
        cfg.name = name;
        cfg.benign_events = 500;
        GeneratedTrace t = generate(cfg);
        INFO("scenario ", name);
        CHECK(!t.labels.malicious_events.empty());
        CHECK(!t.labels.malicious_entities.empty());
        REQUIRE(!t.entry_event_uuid.empty());
        CHECK(t.labels.malicious_events.count(t.entry_event_uuid) == 1);

        std::set<std::string> uuids;
        for (size_t i = 0; i < t.events.size(); ++i) {
            uuids.insert(t.events[i].uuid);
            // Attack events live strictly in the held-out suffix.
            if (t.labels.event_is_malicious(t.events[i].uuid)) CHECK(i >= t.train_end);
        }
        for (const auto& u : t.labels.malicious_events) CHECK(uuids.count(u) == 1);

        // Timestamps are non-decreasing (valid trace).
        for (size_t i = 1; i < t.events.size(); ++i) CHECK(t.events[i].ts >= t.events[i - 1].ts);
    }
}

TEST_CASE("every scenario's benign prefix alarms under default parameters") {
    for (const char* name : {"grey_nodes", "dependency_explosion", "custom_alarm", "poisoning"}) {
        ScenarioConfig cfg;
        cfg.name = name;
        cfg.benign_events = 700;
        GeneratedTrace t = generate(cfg);
        FeatureInterner feats;
        EdgeInterner edges;
        ParamStore defaults;
        RuleConfig rc = scenario_rule_config();
        std::vector<Event> prefix(t.events.begin(), t.events.begin() + t.train_end);
        auto alarms = detect(prefix, defaults, rc, feats, edges);
        INFO("scenario ", name);
        CHECK(!alarms.empty());
    }
}

TEST_CASE("the kill chain exercises every alarm class at defaults") {
    ScenarioConfig cfg;
    cfg.name = "grey_nodes";
    cfg.benign_events = 400;
    GeneratedTrace t = generate(cfg);
    FeatureInterner feats;
    EdgeInterner edges;
    ParamStore defaults;
    RuleConfig rc = scenario_rule_config();
    auto alarms = detect(t.events, defaults, rc, feats, edges);
    std::set<std::string> attack_types;
    for (const Alarm& a : alarms)
        if (t.labels.event_is_malicious(a.event_uuid)) attack_types.insert(to_string(a.type));
    for (const char* ty : {"MalFileCreation", "Corrupt", "ChPerm", "FileExec", "MemExec", "DataLeak",
                           "Escalate", "Inject"}) {
        INFO("alarm class ", ty);
        CHECK(attack_types.count(ty) == 1);
    }
}

TEST_CASE("mimicry: zero insertions is the identity, n insertions retarget the donor") {
    ScenarioConfig cfg;
    cfg.name = "grey_nodes";
    cfg.benign_events = 500;
    GeneratedTrace t = generate(cfg);

    std::string donor;
    for (const auto& e : t.events)
        if (e.subj.name == "indexer") {
            donor = e.subj.id;
            break;
        }
    REQUIRE(!donor.empty());

    auto same = inject_mimicry(t.events, t.attack_proc_id, donor, 0);
    CHECK(serialize(same) == serialize(t.events));

    auto extended = inject_mimicry(t.events, t.attack_proc_id, donor, 10);
    REQUIRE(extended.size() == t.events.size() + 10);
    for (size_t i = t.events.size(); i < extended.size(); ++i)
        CHECK(extended[i].subj.id == t.attack_proc_id);

    CHECK_THROWS_AS(inject_mimicry(t.events, t.attack_proc_id, donor, 100000), ConfigError);
}

TEST_CASE("mimicry leaves all pre-existing verdicts unchanged") {
    ScenarioConfig cfg;
    cfg.name = "grey_nodes";
    cfg.benign_events = 500;
    GeneratedTrace t = generate(cfg);
    std::string donor;
    for (const auto& e : t.events)
        if (e.subj.name == "indexer") {
            donor = e.subj.id;
            break;
        }
    auto extended = inject_mimicry(t.events, t.attack_proc_id, donor, 50);

    RuleConfig rc = scenario_rule_config();
    ParamStore defaults;
    FeatureInterner f1, f2;
    EdgeInterner e1, e2;
    auto base = detect(t.events, defaults, rc, f1, e1);
    auto with_mimicry = detect(extended, defaults, rc, f2, e2);
    REQUIRE(with_mimicry.size() >= base.size());
    for (size_t i = 0; i < base.size(); ++i) {
        CHECK(base[i].event_uuid == with_mimicry[i].event_uuid);
        CHECK(base[i].type == with_mimicry[i].type);
        CHECK(base[i].f == with_mimicry[i].f);
    }
}

TEST_CASE("poisoning: zero insertions is the identity; insertions stay in the prefix") {
    ScenarioConfig cfg;
    cfg.name = "poisoning";
    cfg.benign_events = 500;
    GeneratedTrace t = generate(cfg);

    auto same = poison_training(t.events, t.train_end, "203.0.113.66", 0);
    CHECK(serialize(same) == serialize(t.events));

    std::vector<std::string> uuids;
    auto poisoned = poison_training(t.events, t.train_end, "203.0.113.66", 40, &uuids);
    CHECK(poisoned.size() == t.events.size() + 40);
    CHECK(uuids.size() == 40);
    for (size_t i = 1; i < poisoned.size(); ++i) CHECK(poisoned[i].ts >= poisoned[i - 1].ts);

    // All poison events precede the original training-prefix end.
    std::set<std::string> poison_set(uuids.begin(), uuids.end());
    size_t seen = 0, originals = 0;
    for (const auto& e : poisoned) {
        if (poison_set.count(e.uuid)) {
            ++seen;
            CHECK(originals <= t.train_end);
        } else {
            ++originals;
        }
    }
    CHECK(seen == 40);
}

TEST_CASE("random traces are reproducible") {
    auto a = random_trace(9, 100, 20);
    auto b = random_trace(9, 100, 20);
    CHECK(serialize(a) == serialize(b));
}
