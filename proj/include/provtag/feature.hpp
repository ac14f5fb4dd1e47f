#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "provtag/event.hpp"
#include "provtag/types.hpp"

namespace provtag {

/// Node-feature granularity. Sockets are keyed by remote IP alone unless
/// ports are explicitly enabled; the parameter space stays bounded that way.
struct Granularity {
    bool socket_include_port = false;
};

/// Lexical path cleanup: collapse "//" and "/./" so identical raw attributes
/// always map to one key.
inline std::string normalize_path(const std::string& p) {
    std::string out;
    out.reserve(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
        char c = p[i];
        if (c == '/') {
            while (i + 1 < p.size() && (p[i + 1] == '/' || (p[i + 1] == '.' && (i + 2 == p.size() || p[i + 2] == '/'))))
                i += (p[i + 1] == '/') ? 1 : 2;
        }
        out.push_back(c);
    }
    if (out.size() > 1 && out.back() == '/') out.pop_back();
    return out;
}

inline std::string node_feature_of(EntityKind kind, const std::string& name_or_path,
                                   const std::string& ip, std::optional<int64_t> port,
                                   const Granularity& gran) {
    switch (kind) {
        case EntityKind::Process: return "proc:" + (name_or_path.empty() ? std::string("<unknown>") : name_or_path);
        case EntityKind::File: return "file:" + normalize_path(name_or_path);
        case EntityKind::Socket: {
            std::string f = "sock:" + ip;
            if (gran.socket_include_port && port) f += ":" + std::to_string(*port);
            return f;
        }
        case EntityKind::Pipe: return "pipe";
        case EntityKind::Memory: return "mem";
    }
    return "?";
}

inline std::string node_feature_of(const SubjectRef& s) { return "proc:" + (s.name.empty() ? std::string("<unknown>") : s.name); }

inline std::string node_feature_of(const ObjectRef& o, const Granularity& gran) {
    const std::string& name = (o.kind == EntityKind::Process && !o.name.empty()) ? o.name : o.path;
    return node_feature_of(o.kind, name, o.ip, o.port, gran);
}

/// "|" separates edge-key components, so it is escaped inside them.
inline std::string escape_component(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '\\' || c == '|') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

inline std::string unescape_component(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) ++i;
        out.push_back(s[i]);
    }
    return out;
}

/// Serialized edge-feature key: src_feature|event_type|dst_feature.
inline std::string edge_key_string(const std::string& src_feature, EventType type,
                                   const std::string& dst_feature) {
    return escape_component(src_feature) + "|" + to_string(type) + "|" + escape_component(dst_feature);
}

/// Splits an edge-key string back into its three components.
inline std::vector<std::string> split_edge_key(const std::string& key) {
    std::vector<std::string> parts;
    std::string cur;
    for (size_t i = 0; i < key.size(); ++i) {
        if (key[i] == '\\' && i + 1 < key.size()) {
            cur.push_back(key[++i]);
        } else if (key[i] == '|') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(key[i]);
        }
    }
    parts.push_back(cur);
    return parts;
}

/// Interns node-feature strings to dense ids. Ids are assigned in first-touch
/// order, which is deterministic for a fixed trace.
class FeatureInterner {
  public:
    uint32_t intern(const std::string& s) {
        auto it = index_.find(s);
        if (it != index_.end()) return it->second;
        uint32_t id = static_cast<uint32_t>(strings_.size());
        strings_.push_back(s);
        index_.emplace(strings_.back(), id);
        return id;
    }
    const std::string& str(uint32_t id) const { return strings_[id]; }
    std::optional<uint32_t> find(const std::string& s) const {
        auto it = index_.find(s);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }
    size_t size() const { return strings_.size(); }

  private:
    std::unordered_map<std::string, uint32_t> index_;
    std::vector<std::string> strings_;
};

/// Interns (src_feature, event_type, dst_feature) triples.
class EdgeInterner {
  public:
    struct Triple {
        uint32_t src;
        EventType type;
        uint32_t dst;
    };

    uint32_t intern(uint32_t src_feat, EventType type, uint32_t dst_feat) {
        uint64_t packed = pack(src_feat, type, dst_feat);
        auto it = index_.find(packed);
        if (it != index_.end()) return it->second;
        uint32_t id = static_cast<uint32_t>(triples_.size());
        triples_.push_back({src_feat, type, dst_feat});
        index_.emplace(packed, id);
        return id;
    }
    const Triple& triple(uint32_t id) const { return triples_[id]; }
    std::string str(uint32_t id, const FeatureInterner& feats) const {
        const Triple& t = triples_[id];
        return edge_key_string(feats.str(t.src), t.type, feats.str(t.dst));
    }
    size_t size() const { return triples_.size(); }

  private:
    static uint64_t pack(uint32_t s, EventType t, uint32_t d) {
        // 24 bits of src id, 8 of type, 32 of dst id.
        return (static_cast<uint64_t>(s) << 40) | (static_cast<uint64_t>(static_cast<uint8_t>(t)) << 32) |
               static_cast<uint64_t>(d);
    }
    std::unordered_map<uint64_t, uint32_t> index_;
    std::vector<Triple> triples_;
};

}  // namespace provtag
