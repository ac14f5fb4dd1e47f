#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "provtag/types.hpp"

namespace provtag {

struct SubjectRef {
    std::string id;
    std::string name;  // executable name
    int64_t pid = 0;
    int64_t uid = 0;
};

struct ObjectRef {
    std::string id;
    EntityKind kind = EntityKind::File;
    std::string path;  // files; also exe name for process objects
    std::string ip;    // sockets
    std::optional<int64_t> port;
    std::string name;  // process objects
};

struct Event {
    int64_t ts = 0;  // nanoseconds
    std::string uuid;
    EventType type = EventType::Read;
    SubjectRef subj;
    ObjectRef obj;
    std::string perm;  // subset of "rwx"
    std::optional<int64_t> new_uid;

    bool perm_has_exec() const { return perm.find('x') != std::string::npos; }
};

/// Raw event types map onto the canonical vocabulary before anything else
/// sees them: send->write, recv->read, connect->create (socket), fork->clone.
inline std::optional<EventType> normalize_event_type(const std::string& raw) {
    if (raw == "create" || raw == "connect") return EventType::Create;
    if (raw == "read" || raw == "recv") return EventType::Read;
    if (raw == "write" || raw == "send") return EventType::Write;
    if (raw == "load") return EventType::Load;
    if (raw == "exec" || raw == "execve") return EventType::Exec;
    if (raw == "inject") return EventType::Inject;
    if (raw == "mmap") return EventType::Mmap;
    if (raw == "mprotect") return EventType::Mprotect;
    if (raw == "chmod") return EventType::Chmod;
    if (raw == "mv") return EventType::Mv;
    if (raw == "rm") return EventType::Rm;
    if (raw == "clone" || raw == "fork") return EventType::Clone;
    if (raw == "setuid") return EventType::Setuid;
    return std::nullopt;
}

enum class ParseStatus { Ok, UnknownType };

struct ParseResult {
    ParseStatus status = ParseStatus::Ok;
    Event event;
    std::string raw_type;  // set when status == UnknownType
};

/// Parses one JSON-lines record. Unknown event types are reported as a
/// skip-with-warning signal rather than an error; anything structurally
/// wrong throws ParseError with the line number.
inline ParseResult parse_event_line(const std::string& line, size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "event record must be a JSON object");

    auto require = [&](const char* key) -> const nlohmann::json& {
        auto it = j.find(key);
        if (it == j.end()) throw ParseError(line_no, std::string("missing field '") + key + "'");
        return *it;
    };

    ParseResult r;
    Event& e = r.event;
    try {
        e.ts = require("ts").get<int64_t>();
        e.uuid = require("uuid").get<std::string>();
        const std::string raw_type = require("type").get<std::string>();
        auto ty = normalize_event_type(raw_type);
        if (!ty) {
            r.status = ParseStatus::UnknownType;
            r.raw_type = raw_type;
            return r;
        }
        e.type = *ty;

        const auto& js = require("subj");
        e.subj.id = js.at("id").get<std::string>();
        if (js.contains("name")) e.subj.name = js["name"].get<std::string>();
        if (js.contains("pid")) e.subj.pid = js["pid"].get<int64_t>();
        if (js.contains("uid")) e.subj.uid = js["uid"].get<int64_t>();

        const auto& jo = require("obj");
        e.obj.id = jo.at("id").get<std::string>();
        auto kind = kind_from_string(jo.at("kind").get<std::string>());
        if (!kind) throw ParseError(line_no, "unknown obj.kind '" + jo.at("kind").get<std::string>() + "'");
        e.obj.kind = *kind;
        if (jo.contains("path")) e.obj.path = jo["path"].get<std::string>();
        if (jo.contains("ip")) e.obj.ip = jo["ip"].get<std::string>();
        if (jo.contains("port")) e.obj.port = jo["port"].get<int64_t>();
        if (jo.contains("name")) e.obj.name = jo["name"].get<std::string>();

        if (j.contains("perm")) e.perm = j["perm"].get<std::string>();
        if (j.contains("new_uid")) e.new_uid = j["new_uid"].get<int64_t>();
    } catch (const ParseError&) {
        throw;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(line_no, std::string("bad field: ") + ex.what());
    }

    // "connect" arrives normalized to create-on-socket; everything else must
    // already carry the right object kind for the rules to make sense.
    if (e.type == EventType::Setuid && !e.new_uid)
        throw ParseError(line_no, "setuid event without new_uid");
    if ((e.type == EventType::Mv || e.type == EventType::Rm || e.type == EventType::Chmod) &&
        e.obj.kind != EntityKind::File)
        throw ParseError(line_no, std::string(to_string(e.type)) + " event requires a file object");
    return r;
}

inline nlohmann::json event_to_json(const Event& e) {
    nlohmann::json j;
    j["ts"] = e.ts;
    j["uuid"] = e.uuid;
    j["type"] = to_string(e.type);
    nlohmann::json js;
    js["id"] = e.subj.id;
    js["name"] = e.subj.name;
    js["pid"] = e.subj.pid;
    js["uid"] = e.subj.uid;
    j["subj"] = js;
    nlohmann::json jo;
    jo["id"] = e.obj.id;
    jo["kind"] = to_string(e.obj.kind);
    if (!e.obj.path.empty()) jo["path"] = e.obj.path;
    if (!e.obj.ip.empty()) jo["ip"] = e.obj.ip;
    if (e.obj.port) jo["port"] = *e.obj.port;
    if (!e.obj.name.empty()) jo["name"] = e.obj.name;
    j["obj"] = jo;
    if (!e.perm.empty()) j["perm"] = e.perm;
    if (e.new_uid) j["new_uid"] = *e.new_uid;
    return j;
}

inline std::string event_to_line(const Event& e) { return event_to_json(e).dump(); }

/// Streaming JSON-lines reader. Enforces non-decreasing timestamps and
/// surfaces unknown event types through the warning callback.
class TraceReader {
  public:
    using WarnFn = std::function<void(size_t line_no, const std::string& message)>;

    explicit TraceReader(std::istream& in, WarnFn warn = nullptr)
        : in_(in), warn_(std::move(warn)) {}

    /// Returns the next valid event or nullopt at end of stream.
    std::optional<Event> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.empty()) continue;
            ParseResult r = parse_event_line(line, line_no_);
            if (r.status == ParseStatus::UnknownType) {
                if (warn_) warn_(line_no_, "skipping unknown event type '" + r.raw_type + "'");
                continue;
            }
            if (last_ts_ && r.event.ts < *last_ts_)
                throw ParseError(line_no_, "timestamp went backwards (" + std::to_string(r.event.ts) +
                                               " < " + std::to_string(*last_ts_) + ")");
            last_ts_ = r.event.ts;
            return r.event;
        }
        return std::nullopt;
    }

    size_t line_no() const { return line_no_; }

  private:
    std::istream& in_;
    WarnFn warn_;
    size_t line_no_ = 0;
    std::optional<int64_t> last_ts_;
};

inline std::vector<Event> read_trace(std::istream& in, TraceReader::WarnFn warn = nullptr) {
    TraceReader reader(in, std::move(warn));
    std::vector<Event> events;
    while (auto e = reader.next()) events.push_back(std::move(*e));
    return events;
}

inline std::vector<Event> read_trace_file(const std::string& path, TraceReader::WarnFn warn = nullptr) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trace file: " + path);
    return read_trace(in, std::move(warn));
}

inline void write_trace_file(const std::string& path, const std::vector<Event>& events) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write trace file: " + path);
    for (const auto& e : events) out << event_to_line(e) << '\n';
}

}  // namespace provtag
