#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "provtag/event.hpp"
#include "provtag/labels.hpp"
#include "provtag/rules.hpp"
#include "provtag/types.hpp"

namespace provtag {

/// Scenario classes mirror the failure modes the detector is trained to fix:
/// shared "grey" network endpoints, dependency explosion through a hot file,
/// and per-process alarm-threshold customization. "poisoning" is the fixture
/// for training-set poisoning robustness.
struct ScenarioConfig {
    std::string name = "grey_nodes";
    uint64_t seed = 1;
    size_t benign_events = 8000;  // approximate benign volume
    double train_fraction = 0.6;
    size_t poison_events = 0;               // poisoning scenario only
    std::string attack_ip = "203.0.113.66";  // poison/attack entry IP
};

struct GeneratedTrace {
    std::vector<Event> events;  // chronological; benign prefix then attack suffix
    Labels labels;
    size_t train_end = 0;  // events[0..train_end) is the benign training split
    std::vector<std::string> poison_uuids;
    std::string entry_event_uuid;  // first kill-chain alarm event (MalFileCreation)
    std::string attack_proc_id;    // mimicry target entity
};

/// Rule config the scenarios are written against: one secret prefix so the
/// data-leak alarm path is exercised.
inline RuleConfig scenario_rule_config() {
    RuleConfig rc;
    rc.conf_rules.push_back({"/etc/secret", 0.0});
    return rc;
}

namespace detail {

class TraceBuilder {
  public:
    explicit TraceBuilder(uint64_t seed) : rng_(seed) {}

    std::mt19937_64& rng() { return rng_; }
    std::vector<Event>& events() { return events_; }
    Labels& labels() { return labels_; }

    size_t pick(size_t n) { return static_cast<size_t>(rng_() % n); }
    size_t range(size_t lo, size_t hi) { return lo + pick(hi - lo + 1); }  // inclusive

    std::string new_proc(const std::string& name) {
        return "p" + std::to_string(proc_counter_++) + ":" + name;
    }
    std::string new_socket_id() { return "s" + std::to_string(sock_counter_++); }

    SubjectRef proc(const std::string& id, const std::string& name, int64_t uid = 1000) {
        return {id, name, static_cast<int64_t>(1000 + proc_counter_), uid};
    }

    static ObjectRef file(const std::string& path) {
        ObjectRef o;
        o.id = "f:" + path;
        o.kind = EntityKind::File;
        o.path = path;
        return o;
    }
    ObjectRef socket(const std::string& id, const std::string& ip) {
        ObjectRef o;
        o.id = id;
        o.kind = EntityKind::Socket;
        o.ip = ip;
        o.port = static_cast<int64_t>(30000 + pick(20000));
        return o;
    }
    static ObjectRef process_obj(const std::string& id, const std::string& name) {
        ObjectRef o;
        o.id = id;
        o.kind = EntityKind::Process;
        o.name = name;
        return o;
    }
    static ObjectRef memory(const std::string& id) {
        ObjectRef o;
        o.id = id;
        o.kind = EntityKind::Memory;
        return o;
    }

    Event& emit(EventType type, const SubjectRef& s, const ObjectRef& o, const std::string& perm = "",
                std::optional<int64_t> new_uid = std::nullopt, const char* uuid_prefix = "e") {
        Event e;
        e.ts = ts_;
        ts_ += 1000000;  // 1ms cadence
        char buf[32];
        snprintf(buf, sizeof buf, "%s%07zu", uuid_prefix, uuid_counter_++);
        e.uuid = buf;
        e.type = type;
        e.subj = s;
        e.obj = o;
        e.perm = perm;
        e.new_uid = new_uid;
        events_.push_back(std::move(e));
        return events_.back();
    }

    void label_event(const Event& e, const std::string& step = "") {
        labels_.malicious_events.insert(e.uuid);
        if (!step.empty()) labels_.steps[step].push_back(e.uuid);
    }
    void label_entity(const std::string& id) { labels_.malicious_entities.insert(id); }

  private:
    std::mt19937_64 rng_;
    std::vector<Event> events_;
    Labels labels_;
    int64_t ts_ = 1000000000;
    size_t uuid_counter_ = 0;
    size_t proc_counter_ = 0;
    size_t sock_counter_ = 0;
};

// --- benign building blocks; every generator draws from bounded pools so a
// --- feature seen in the test split was also seen during training ---

inline std::string pool_path(const char* stem, size_t idx) {
    return std::string(stem) + std::to_string(idx);
}

/// Browser flow: connect to an external service, read, drop cache and
/// download files. The socket taint makes every write/create alarm under
/// default parameters.
inline void browser_session(TraceBuilder& b, const std::vector<std::string>& ip_pool) {
    SubjectRef ff = b.proc(b.new_proc("firefox"), "firefox");
    ObjectRef sock = b.socket(b.new_socket_id(), ip_pool[b.pick(ip_pool.size())]);
    b.emit(EventType::Create, ff, sock);
    const size_t reads = b.range(1, 2);
    for (size_t i = 0; i < reads; ++i) b.emit(EventType::Read, ff, sock);
    const size_t writes = b.range(1, 3);
    for (size_t i = 0; i < writes; ++i)
        b.emit(EventType::Write, ff, TraceBuilder::file(pool_path("/home/u/.cache/ff", b.pick(10))));
    b.emit(EventType::Create, ff, TraceBuilder::file(pool_path("/home/u/dl/d", b.pick(10))));
}

/// Shell flow: every session reads the history file and fans its taint out
/// into work files; a helper tool spreads it one hop further.
inline void shell_session(TraceBuilder& b) {
    SubjectRef sh = b.proc(b.new_proc("bash"), "bash");
    ObjectRef hist = TraceBuilder::file("/home/u/.bash_history");
    b.emit(EventType::Read, sh, hist);
    const size_t writes = b.range(2, 4);
    for (size_t i = 0; i < writes; ++i)
        b.emit(EventType::Write, sh, TraceBuilder::file(pool_path("/home/u/work/w", b.pick(20))));
    b.emit(EventType::Write, sh, hist);
    if (b.pick(2) == 0) {
        SubjectRef tool = b.proc(b.new_proc("make"), "make");
        b.emit(EventType::Read, tool, TraceBuilder::file(pool_path("/home/u/work/w", b.pick(20))));
        b.emit(EventType::Write, tool, TraceBuilder::file("/var/log/build.log"));
    }
}

/// Remote login flow: the per-connection handler is tainted by the client
/// socket and then executes a shell, the classic benign FileExec pattern.
inline void sshd_session(TraceBuilder& b, const std::vector<std::string>& client_pool) {
    SubjectRef sshd = b.proc(b.new_proc("sshd"), "sshd");
    ObjectRef sock = b.socket(b.new_socket_id(), client_pool[b.pick(client_pool.size())]);
    b.emit(EventType::Create, sshd, sock);
    b.emit(EventType::Read, sshd, sock);
    b.emit(EventType::Exec, sshd, TraceBuilder::file("/bin/bash"));
    b.emit(EventType::Write, sshd, TraceBuilder::file("/var/log/auth.log"));
}

/// Mail flow: fetch from the mail server, store an attachment.
inline void mail_session(TraceBuilder& b, const std::string& mail_ip) {
    SubjectRef pine = b.proc(b.new_proc("pine"), "pine");
    ObjectRef sock = b.socket(b.new_socket_id(), mail_ip);
    b.emit(EventType::Create, pine, sock);
    b.emit(EventType::Read, pine, sock);
    b.emit(EventType::Create, pine, TraceBuilder::file(pool_path("/home/u/mail/att", b.pick(8))));
    b.emit(EventType::Write, pine, TraceBuilder::file(pool_path("/home/u/mail/att", b.pick(8))));
}

/// Quiet file churn with no taint and no alarms; its process doubles as the
/// mimicry donor.
inline void indexer_ops(TraceBuilder& b, const SubjectRef& indexer) {
    b.emit(EventType::Read, indexer, TraceBuilder::file(pool_path("/srv/docs/doc", b.pick(12))));
    b.emit(EventType::Write, indexer, TraceBuilder::file(pool_path("/srv/index/idx", b.pick(4))));
}

/// Office flow for the poisoning fixture: no network taint, no alarms.
inline void worker_session(TraceBuilder& b) {
    SubjectRef w = b.proc(b.new_proc("worker"), "worker");
    const size_t ops = b.range(2, 4);
    for (size_t i = 0; i < ops; ++i) {
        b.emit(EventType::Read, w, TraceBuilder::file(pool_path("/srv/data/in", b.pick(10))));
        b.emit(EventType::Write, w, TraceBuilder::file(pool_path("/srv/data/out", b.pick(10))));
    }
}

/// The download–execute–exfiltrate kill chain. Touches every alarm class;
/// every edge involves at least one feature absent from the benign pools, so
/// conservative defaults keep firing after training.
inline void attack_chain(TraceBuilder& b, GeneratedTrace& out, const std::string& c2_ip,
                         const std::string& grey_ip = "", const std::string& proc_name = "dropper",
                         const std::string& payload_path = "/tmp/tcdrop") {
    SubjectRef d = b.proc(b.new_proc(proc_name), proc_name);
    out.attack_proc_id = d.id;
    b.label_entity(d.id);

    if (!grey_ip.empty()) {
        ObjectRef gs = b.socket(b.new_socket_id(), grey_ip);
        b.label_event(b.emit(EventType::Create, d, gs, "", std::nullopt, "atk"));
        b.label_event(b.emit(EventType::Read, d, gs, "", std::nullopt, "atk"));
    }

    ObjectRef c2 = b.socket(b.new_socket_id(), c2_ip);
    b.label_entity(c2.id);
    b.label_event(b.emit(EventType::Create, d, c2, "", std::nullopt, "atk"));
    b.label_event(b.emit(EventType::Read, d, c2, "", std::nullopt, "atk"));

    ObjectRef payload = TraceBuilder::file(payload_path);
    b.label_entity(payload.id);
    const Event& entry = b.emit(EventType::Create, d, payload, "", std::nullopt, "atk");
    out.entry_event_uuid = entry.uuid;
    b.label_event(entry, "entry");
    b.label_event(b.emit(EventType::Write, d, payload, "", std::nullopt, "atk"), "drop");
    b.label_event(b.emit(EventType::Chmod, d, payload, "rwx", std::nullopt, "atk"), "prep");
    b.label_event(b.emit(EventType::Exec, d, payload, "", std::nullopt, "atk"), "exec");
    b.label_event(b.emit(EventType::Mmap, d, TraceBuilder::memory(d.id + ":m0"), "rwx", std::nullopt, "atk"),
                  "mem");
    b.label_event(b.emit(EventType::Read, d, TraceBuilder::file("/etc/secret/master.key"), "",
                         std::nullopt, "atk"));
    b.label_event(b.emit(EventType::Write, d, c2, "", std::nullopt, "atk"), "leak");
    b.label_event(b.emit(EventType::Setuid, d, TraceBuilder::process_obj(d.id, proc_name), "",
                         int64_t{0}, "atk"),
                  "escalate");

    SubjectRef victim = b.proc(b.new_proc("backupd"), "backupd");
    b.label_entity(victim.id);
    b.label_event(
        b.emit(EventType::Inject, d, TraceBuilder::process_obj(victim.id, "backupd"), "", std::nullopt, "atk"),
        "inject");
    b.label_event(b.emit(EventType::Write, victim, TraceBuilder::file("/etc/passwd"), "", std::nullopt, "atk"),
                  "corrupt");
}

}  // namespace detail

/// Deterministic scenario generation: identical (config, seed) gives a
/// byte-identical trace. Benign events fill the body, the kill chain lands
/// in the held-out suffix, labels mark exactly the injected events/entities.
inline GeneratedTrace generate(const ScenarioConfig& cfg) {
    using namespace detail;
    TraceBuilder b(cfg.seed);
    GeneratedTrace out;

    const std::vector<std::string> grey_ips = {"198.51.100.10", "198.51.100.11", "198.51.100.12",
                                               "198.51.100.13"};
    const std::vector<std::string> client_ips = {"192.0.2.21", "192.0.2.22", "192.0.2.23"};
    const std::string mail_ip = "192.0.2.73";
    const std::string c2_ip = "203.0.113.99";

    SubjectRef indexer = b.proc(b.new_proc("indexer"), "indexer");

    if (cfg.name == "grey_nodes") {
        while (b.events().size() < cfg.benign_events) {
            browser_session(b, grey_ips);
            if (b.pick(3) == 0) mail_session(b, mail_ip);
            indexer_ops(b, indexer);
        }
    } else if (cfg.name == "dependency_explosion") {
        // One tainted write into the hot file, then every shell session
        // fans the taint out: the explosion source.
        SubjectRef seed_sh = b.proc(b.new_proc("bash"), "bash");
        ObjectRef repo = b.socket(b.new_socket_id(), "198.51.100.40");
        b.emit(EventType::Create, seed_sh, repo);
        b.emit(EventType::Read, seed_sh, repo);
        b.emit(EventType::Write, seed_sh, TraceBuilder::file("/home/u/.bash_history"));
        while (b.events().size() < cfg.benign_events) {
            shell_session(b);
            if (b.pick(4) == 0) indexer_ops(b, indexer);
        }
    } else if (cfg.name == "custom_alarm") {
        while (b.events().size() < cfg.benign_events) {
            sshd_session(b, client_ips);
            if (b.pick(2) == 0) browser_session(b, grey_ips);
            if (b.pick(4) == 0) indexer_ops(b, indexer);
        }
    } else if (cfg.name == "poisoning") {
        while (b.events().size() < cfg.benign_events) {
            worker_session(b);
            if (b.pick(4) == 0) browser_session(b, grey_ips);
            indexer_ops(b, indexer);
        }
    } else {
        throw ConfigError("unknown scenario '" + cfg.name + "'");
    }

    out.train_end = static_cast<size_t>(static_cast<double>(b.events().size()) * cfg.train_fraction);

    if (cfg.name == "custom_alarm") {
        // The motivating pair: sshd execs bash routinely, firefox doing the
        // same is the attack. Same event type and object, different subject.
        SubjectRef ff = b.proc(b.new_proc("firefox"), "firefox");
        out.attack_proc_id = ff.id;
        b.label_entity(ff.id);
        ObjectRef c2 = b.socket(b.new_socket_id(), c2_ip);
        b.label_entity(c2.id);
        b.label_event(b.emit(EventType::Create, ff, c2, "", std::nullopt, "atk"));
        b.label_event(b.emit(EventType::Read, ff, c2, "", std::nullopt, "atk"));
        const Event& ex = b.emit(EventType::Exec, ff, TraceBuilder::file("/bin/bash"), "", std::nullopt, "atk");
        out.entry_event_uuid = ex.uuid;
        b.label_event(ex, "exec");
        b.label_event(b.emit(EventType::Write, ff, TraceBuilder::file("/etc/passwd"), "", std::nullopt, "atk"),
                      "corrupt");
    } else if (cfg.name == "poisoning") {
        attack_chain(b, out, cfg.attack_ip, "", "dropper", "/tmp/tcdrop");
    } else {
        attack_chain(b, out, c2_ip, cfg.name == "grey_nodes" ? grey_ips[2] : "");
    }

    out.events = std::move(b.events());
    out.labels = std::move(b.labels());
    return out;
}

/// Appends n "fake" events after the attack: the donor's benign activity
/// re-targeted onto the attack entity. A streaming detector's verdicts on
/// everything already emitted cannot change.
inline std::vector<Event> inject_mimicry(const std::vector<Event>& trace, const std::string& target_entity,
                                         const std::string& donor_entity, size_t n_events) {
    std::vector<const Event*> donor;
    for (const Event& e : trace)
        if (e.subj.id == donor_entity) donor.push_back(&e);
    if (donor.size() < n_events)
        throw ConfigError("mimicry donor has only " + std::to_string(donor.size()) + " events, need " +
                          std::to_string(n_events));

    std::string target_name = target_entity;
    for (const Event& e : trace)
        if (e.subj.id == target_entity) {
            target_name = e.subj.name;
            break;
        }

    std::vector<Event> out = trace;
    int64_t ts = trace.empty() ? 0 : trace.back().ts;
    for (size_t k = 0; k < n_events; ++k) {
        Event e = *donor[k];
        e.subj.id = target_entity;
        e.subj.name = target_name;
        e.ts = ts + static_cast<int64_t>(k + 1) * 1000000;
        char buf[32];
        snprintf(buf, sizeof buf, "mim%07zu", k);
        e.uuid = buf;
        out.push_back(std::move(e));
    }
    return out;
}

/// Inserts n benign-looking events that involve the future attack entry IP
/// into the training prefix: a process keeps fetching from that IP and
/// dropping package files, each one a "false" alarm the learner will try to
/// explain away.
inline std::vector<Event> poison_training(const std::vector<Event>& trace, size_t train_end,
                                          const std::string& attack_ip, size_t n_events,
                                          std::vector<std::string>* poison_uuids = nullptr) {
    if (n_events == 0) return trace;
    if (train_end == 0 || train_end > trace.size())
        throw ConfigError("poison_training: invalid training prefix");

    std::vector<Event> out;
    out.reserve(trace.size() + n_events);
    const size_t stride = std::max<size_t>(1, train_end / (n_events + 1));
    size_t inserted = 0;
    const std::string syncd_id = "p:syncd";
    const std::string sock_id = "s:poison";
    bool socket_created = false;

    for (size_t i = 0; i < trace.size(); ++i) {
        out.push_back(trace[i]);
        if (i < train_end && inserted < n_events && (i + 1) % stride == 0) {
            const int64_t ts = trace[i].ts;
            auto emit = [&](EventType type, const ObjectRef& o) {
                Event e;
                e.ts = ts;
                char buf[32];
                snprintf(buf, sizeof buf, "poison%05zu", inserted);
                e.uuid = buf;
                e.type = type;
                e.subj = {syncd_id, "syncd", 4242, 1000};
                e.obj = o;
                if (poison_uuids) poison_uuids->push_back(e.uuid);
                out.push_back(std::move(e));
                ++inserted;
            };
            if (!socket_created) {
                ObjectRef s;
                s.id = sock_id;
                s.kind = EntityKind::Socket;
                s.ip = attack_ip;
                emit(EventType::Create, s);
                socket_created = true;
            } else if (inserted % 4 == 1) {
                ObjectRef s;
                s.id = sock_id;
                s.kind = EntityKind::Socket;
                s.ip = attack_ip;
                emit(EventType::Read, s);
            } else {
                const size_t slot = inserted % 8;
                emit(inserted % 2 == 0 ? EventType::Create : EventType::Write,
                     detail::TraceBuilder::file(detail::pool_path("/var/sync/pkg", slot)));
            }
        }
    }
    return out;
}

/// Unstructured random traffic for the gradient-checking oracle: small casts
/// of entities, the full event vocabulary, adversarially uninvested in
/// looking realistic.
inline std::vector<Event> random_trace(uint64_t seed, size_t n_events, size_t n_nodes) {
    std::mt19937_64 rng(seed);
    auto pick = [&](size_t n) { return static_cast<size_t>(rng() % n); };

    const size_t n_procs = std::max<size_t>(2, n_nodes / 3);
    const size_t n_files = std::max<size_t>(2, n_nodes / 3);
    const size_t n_socks = std::max<size_t>(1, n_nodes - n_procs - n_files);

    std::vector<Event> out;
    int64_t ts = 1000000000;
    for (size_t k = 0; k < n_events; ++k) {
        static const EventType kTypes[] = {
            EventType::Create, EventType::Read,  EventType::Write,   EventType::Load,
            EventType::Exec,   EventType::Inject, EventType::Mmap,   EventType::Mprotect,
            EventType::Chmod,  EventType::Mv,    EventType::Rm,      EventType::Clone,
            EventType::Setuid,
        };
        // Weight toward the propagating types so tags actually move.
        const size_t roll = pick(20);
        EventType type = roll < 13 ? kTypes[roll % 6] : kTypes[pick(13)];

        Event e;
        e.ts = ts;
        ts += 1000000;
        char buf[32];
        snprintf(buf, sizeof buf, "r%07zu", k);
        e.uuid = buf;
        e.type = type;
        const size_t sp = pick(n_procs);
        e.subj = {"rp" + std::to_string(sp), "rproc" + std::to_string(sp % 5),
                  static_cast<int64_t>(100 + sp), 1000};

        auto file_obj = [&]() {
            size_t f = pick(n_files);
            ObjectRef o;
            o.id = "rf" + std::to_string(f);
            o.kind = EntityKind::File;
            o.path = (f % 7 == 0) ? "/secret/s" + std::to_string(f) : "/data/f" + std::to_string(f);
            return o;
        };
        auto sock_obj = [&]() {
            size_t s = pick(n_socks);
            ObjectRef o;
            o.id = "rs" + std::to_string(s);
            o.kind = EntityKind::Socket;
            o.ip = "10.0.0." + std::to_string(s % 16);
            return o;
        };
        auto proc_obj = [&]() {
            size_t p = pick(n_procs);
            ObjectRef o;
            o.id = "rp" + std::to_string(p);
            o.kind = EntityKind::Process;
            o.name = "rproc" + std::to_string(p % 5);
            return o;
        };

        switch (type) {
            case EventType::Exec:
            case EventType::Load:
            case EventType::Chmod:
            case EventType::Mv:
            case EventType::Rm:
                e.obj = file_obj();
                break;
            case EventType::Inject:
            case EventType::Clone: {
                e.obj = proc_obj();
                if (e.obj.id == e.subj.id) e.obj = proc_obj();
                break;
            }
            case EventType::Mmap:
            case EventType::Mprotect: {
                ObjectRef o;
                o.id = e.subj.id + ":mem";
                o.kind = EntityKind::Memory;
                e.obj = o;
                break;
            }
            case EventType::Setuid:
                e.obj = ObjectRef{e.subj.id, EntityKind::Process, "", "", std::nullopt, e.subj.name};
                e.new_uid = static_cast<int64_t>(pick(2) == 0 ? 0 : 1000);
                break;
            default: {
                const size_t kind = pick(5);
                e.obj = (kind < 3) ? file_obj() : (kind == 3 ? sock_obj() : file_obj());
                if (kind == 4) {
                    ObjectRef o;
                    o.id = "rpipe" + std::to_string(pick(3));
                    o.kind = EntityKind::Pipe;
                    e.obj = o;
                }
                break;
            }
        }
        if (type == EventType::Chmod) e.perm = pick(2) == 0 ? "rwx" : "rw";
        if (type == EventType::Mmap || type == EventType::Mprotect) e.perm = pick(2) == 0 ? "rx" : "rw";
        out.push_back(std::move(e));
    }
    return out;
}

inline RuleConfig random_trace_rule_config() {
    RuleConfig rc;
    rc.conf_rules.push_back({"/secret", 0.0});
    rc.decay_period = 25;  // small period so decay branches get exercised
    return rc;
}

}  // namespace provtag
