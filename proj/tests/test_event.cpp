#include <doctest.h>

#include <sstream>

#include "provtag/event.hpp"

using namespace provtag;

TEST_CASE("read record with socket object round-trips") {
    const std::string line =
        R"({"ts": 100, "uuid": "u1", "type": "read", "subj": {"id": "p1", "name": "firefox", "pid": 10, "uid": 1000}, "obj": {"id": "s1", "kind": "socket", "ip": "1.2.3.4", "port": 443}})";
    ParseResult r = parse_event_line(line, 1);
    REQUIRE(r.status == ParseStatus::Ok);
    CHECK(r.event.type == EventType::Read);
    CHECK(r.event.obj.kind == EntityKind::Socket);
    CHECK(r.event.obj.ip == "1.2.3.4");
    CHECK(r.event.subj.name == "firefox");

    ParseResult again = parse_event_line(event_to_line(r.event), 2);
    CHECK(again.event.uuid == r.event.uuid);
    CHECK(again.event.obj.kind == r.event.obj.kind);
    CHECK(again.event.obj.port == r.event.obj.port);
}

TEST_CASE("timestamps must be non-decreasing within a trace") {
    std::istringstream in(
        R"({"ts": 100, "uuid": "a", "type": "read", "subj": {"id": "p", "name": "x"}, "obj": {"id": "f", "kind": "file", "path": "/a"}}
{"ts": 99, "uuid": "b", "type": "read", "subj": {"id": "p", "name": "x"}, "obj": {"id": "f", "kind": "file", "path": "/a"}}
)");
    TraceReader reader(in);
    REQUIRE(reader.next().has_value());
    CHECK_THROWS_AS(reader.next(), ParseError);
}

TEST_CASE("send/recv/connect/fork normalize onto the canonical vocabulary") {
    const std::string line =
        R"({"ts": 5, "uuid": "u", "type": "send", "subj": {"id": "p", "name": "x"}, "obj": {"id": "s", "kind": "socket", "ip": "9.9.9.9"}})";
    ParseResult r = parse_event_line(line, 1);
    REQUIRE(r.status == ParseStatus::Ok);
    CHECK(r.event.type == EventType::Write);
    CHECK(r.event.obj.kind == EntityKind::Socket);

    // The normalized form survives a serialize/parse cycle unchanged.
    ParseResult again = parse_event_line(event_to_line(r.event), 2);
    CHECK(again.event.type == EventType::Write);

    CHECK(normalize_event_type("recv") == EventType::Read);
    CHECK(normalize_event_type("connect") == EventType::Create);
    CHECK(normalize_event_type("fork") == EventType::Clone);
    CHECK(!normalize_event_type("teleport").has_value());
}

TEST_CASE("malformed lines report their line number") {
    try {
        parse_event_line("{not json", 41);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 41);
    }
    CHECK_THROWS_AS(parse_event_line(R"({"ts": 1})", 1), ParseError);
}

TEST_CASE("unknown event types are skipped with a warning, not fatal") {
    std::istringstream in(
        R"({"ts": 1, "uuid": "a", "type": "frobnicate", "subj": {"id": "p", "name": "x"}, "obj": {"id": "f", "kind": "file", "path": "/a"}}
{"ts": 2, "uuid": "b", "type": "read", "subj": {"id": "p", "name": "x"}, "obj": {"id": "f", "kind": "file", "path": "/a"}}
)");
    size_t warnings = 0;
    TraceReader reader(in, [&](size_t, const std::string&) { ++warnings; });
    auto e = reader.next();
    REQUIRE(e.has_value());
    CHECK(e->uuid == "b");
    CHECK(warnings == 1);
    CHECK(!reader.next().has_value());
}

TEST_CASE("structural invariants are enforced at parse time") {
    CHECK_THROWS_AS(parse_event_line(
                        R"({"ts": 1, "uuid": "a", "type": "setuid", "subj": {"id": "p", "name": "x"}, "obj": {"id": "p", "kind": "process", "name": "x"}})",
                        1),
                    ParseError);
    CHECK_THROWS_AS(parse_event_line(
                        R"({"ts": 1, "uuid": "a", "type": "rm", "subj": {"id": "p", "name": "x"}, "obj": {"id": "s", "kind": "socket", "ip": "1.1.1.1"}})",
                        1),
                    ParseError);
}

TEST_CASE("unknown optional fields are ignored") {
    const std::string line =
        R"({"ts": 1, "uuid": "a", "type": "read", "subj": {"id": "p", "name": "x"}, "obj": {"id": "f", "kind": "file", "path": "/a"}, "extra": {"nested": [1,2,3]}})";
    ParseResult r = parse_event_line(line, 1);
    CHECK(r.status == ParseStatus::Ok);
}
