#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace provtag {

enum class EntityKind : uint8_t { Process, File, Socket, Pipe, Memory };

enum class EventType : uint8_t {
    Create,
    Read,
    Write,
    Load,
    Exec,
    Inject,
    Mmap,
    Mprotect,
    Chmod,
    Mv,
    Rm,
    Clone,
    Setuid,
};

enum class SubjectType : uint8_t { Benign, Suspect, SuspectEnv };

enum class AlarmType : uint8_t {
    MemExec,
    FileExec,
    Inject,
    ChPerm,
    Corrupt,
    Escalate,
    DataLeak,
    MalFileCreation,
};

inline const char* to_string(EntityKind k) {
    switch (k) {
        case EntityKind::Process: return "process";
        case EntityKind::File: return "file";
        case EntityKind::Socket: return "socket";
        case EntityKind::Pipe: return "pipe";
        case EntityKind::Memory: return "memory";
    }
    return "?";
}

inline std::optional<EntityKind> kind_from_string(const std::string& s) {
    if (s == "process") return EntityKind::Process;
    if (s == "file") return EntityKind::File;
    if (s == "socket") return EntityKind::Socket;
    if (s == "pipe") return EntityKind::Pipe;
    if (s == "memory") return EntityKind::Memory;
    return std::nullopt;
}

inline const char* to_string(EventType t) {
    switch (t) {
        case EventType::Create: return "create";
        case EventType::Read: return "read";
        case EventType::Write: return "write";
        case EventType::Load: return "load";
        case EventType::Exec: return "exec";
        case EventType::Inject: return "inject";
        case EventType::Mmap: return "mmap";
        case EventType::Mprotect: return "mprotect";
        case EventType::Chmod: return "chmod";
        case EventType::Mv: return "mv";
        case EventType::Rm: return "rm";
        case EventType::Clone: return "clone";
        case EventType::Setuid: return "setuid";
    }
    return "?";
}

inline const char* to_string(AlarmType a) {
    switch (a) {
        case AlarmType::MemExec: return "MemExec";
        case AlarmType::FileExec: return "FileExec";
        case AlarmType::Inject: return "Inject";
        case AlarmType::ChPerm: return "ChPerm";
        case AlarmType::Corrupt: return "Corrupt";
        case AlarmType::Escalate: return "Escalate";
        case AlarmType::DataLeak: return "DataLeak";
        case AlarmType::MalFileCreation: return "MalFileCreation";
    }
    return "?";
}

inline const char* to_string(SubjectType s) {
    switch (s) {
        case SubjectType::Benign: return "benign";
        case SubjectType::Suspect: return "suspect";
        case SubjectType::SuspectEnv: return "suspect_env";
    }
    return "?";
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

/// Malformed input line; carries the 1-based line number.
class ParseError : public std::runtime_error {
  public:
    ParseError(size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    size_t line() const { return line_; }

  private:
    size_t line_;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Graph-consistency violation (e.g. one entity id seen with two kinds).
class GraphError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace provtag
