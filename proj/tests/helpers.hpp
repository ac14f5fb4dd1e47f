#pragma once

// Shared fixtures for the unit tests: terse event constructors and an
// engine harness with collected alarms.

#include <string>
#include <vector>

#include "provtag/provtag.hpp"

namespace testutil {

using namespace provtag;

inline int64_t& ts_counter() {
    static int64_t ts = 1000000000;
    return ts;
}

inline Event ev(EventType type, const std::string& proc_id, const std::string& proc_name,
                const ObjectRef& obj, const std::string& perm = "",
                std::optional<int64_t> new_uid = std::nullopt) {
    static size_t n = 0;
    Event e;
    e.ts = ts_counter();
    ts_counter() += 1000;
    e.uuid = "t" + std::to_string(n++);
    e.type = type;
    e.subj = {proc_id, proc_name, 1, 1000};
    e.obj = obj;
    e.perm = perm;
    e.new_uid = new_uid;
    return e;
}

inline ObjectRef file_obj(const std::string& path) {
    ObjectRef o;
    o.id = "f:" + path;
    o.kind = EntityKind::File;
    o.path = path;
    return o;
}

inline ObjectRef sock_obj(const std::string& id, const std::string& ip) {
    ObjectRef o;
    o.id = id;
    o.kind = EntityKind::Socket;
    o.ip = ip;
    return o;
}

inline ObjectRef proc_obj(const std::string& id, const std::string& name) {
    ObjectRef o;
    o.id = id;
    o.kind = EntityKind::Process;
    o.name = name;
    return o;
}

inline ObjectRef pipe_obj(const std::string& id) {
    ObjectRef o;
    o.id = id;
    o.kind = EntityKind::Pipe;
    return o;
}

inline ObjectRef mem_obj(const std::string& id) {
    ObjectRef o;
    o.id = id;
    o.kind = EntityKind::Memory;
    return o;
}

/// Engine plus everything it needs, with alarms collected into a vector.
struct Harness {
    FeatureInterner feats;
    EdgeInterner edges;
    ParamStore params;
    RuleConfig rc;
    EngineOptions opts;
    std::vector<Alarm> alarms;
    std::unique_ptr<Engine> engine;

    explicit Harness(bool track_gradients = true) { opts.track_gradients = track_gradients; }

    Engine& make() {
        engine = std::make_unique<Engine>(feats, edges, params, rc, opts);
        engine->sink = [this](const Alarm& a) { alarms.push_back(a); };
        return *engine;
    }

    Engine& get() { return engine ? *engine : make(); }

    void run(const std::vector<Event>& events) {
        Engine& e = get();
        for (const auto& ev : events) e.process(ev);
    }

    const ProvNode* node(const std::string& id) const { return engine->graph().find(id); }
};

inline std::vector<Alarm> detect(const std::vector<Event>& events, const ParamStore& params,
                                 const RuleConfig& rc, FeatureInterner& feats, EdgeInterner& edges) {
    EngineOptions opts;
    Engine engine(feats, edges, params, rc, opts);
    std::vector<Alarm> alarms;
    engine.sink = [&](const Alarm& a) { alarms.push_back(a); };
    for (const auto& e : events) engine.process(e);
    return alarms;
}

}  // namespace testutil
