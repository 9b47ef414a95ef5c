#pragma once

// Run trace: newline-delimited JSON, one header line followed by one line per
// event in (cycle, seq) order. Keys are written in a fixed order so a trace is
// byte-stable.

#include <algorithm>
#include <array>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mmarch/json_io.hpp"

namespace mmarch {

inline constexpr int trace_version = 1;

inline constexpr std::array<std::string_view, 17> event_kinds{
    "deposit",  "shadow-fire", "central-fire", "wm-write", "forget", "reward",
    "utility-update", "interrupt", "delivery", "error", "halt",
    // finer-grained records the metrics are computed from
    "match", "idle", "consume", "formed", "pruned", "tick"};

inline bool known_event_kind(std::string_view k) {
    return std::find(event_kinds.begin(), event_kinds.end(), k) != event_kinds.end();
}

struct TraceHeader {
    int version = trace_version;
    std::uint64_t seed = 0;
    std::string mode = "mm";
    std::int64_t cycle_length_ms = 50;

    bool operator==(const TraceHeader&) const = default;
};

struct TraceEvent {
    std::int64_t cycle = 0;
    std::uint64_t seq = 0;
    std::string kind;
    json data = json::object();

    bool operator==(const TraceEvent&) const = default;
};

struct Trace {
    TraceHeader header;
    std::vector<TraceEvent> events;

    // Append with the next sequence number.
    TraceEvent& append(std::int64_t cycle, std::string kind, json data = json::object()) {
        if (!known_event_kind(kind))
            throw invalid_argument("unknown trace event kind '" + kind + "'");
        if (!events.empty() && cycle < events.back().cycle)
            throw invalid_argument("trace events must not go back in time");
        events.push_back(TraceEvent{cycle, events.size(), std::move(kind), std::move(data)});
        return events.back();
    }

    bool operator==(const Trace&) const = default;
};

inline json header_to_json(const TraceHeader& h) {
    return json{{"version", h.version}, {"seed", h.seed}, {"mode", h.mode},
                {"cycle_length_ms", h.cycle_length_ms}};
}

inline json event_to_json(const TraceEvent& e) {
    return json{{"cycle", e.cycle}, {"seq", e.seq}, {"kind", e.kind}, {"data", e.data}};
}

inline void write_trace(const Trace& t, std::ostream& out) {
    out << header_to_json(t.header).dump() << '\n';
    for (const auto& e : t.events)
        out << event_to_json(e).dump() << '\n';
}

inline std::string trace_text(const Trace& t) {
    std::ostringstream s;
    write_trace(t, s);
    return s.str();
}

namespace detail {

[[noreturn]] inline void trace_fail(std::size_t line, std::size_t last_good, const std::string& why) {
    throw trace_error("trace line " + std::to_string(line) + ": " + why + " (last good line " +
                      std::to_string(last_good) + ")");
}

} // namespace detail

// Parses a trace. Errors name the offending line and the last good one.
inline Trace read_trace(std::istream& in) {
    Trace t;
    std::string line;
    std::size_t n = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++n;
        const bool last = in.eof();
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            detail::trace_fail(n, n - 1, last ? "truncated record" : std::string("malformed JSON: ") + e.what());
        }
        if (!j.is_object())
            detail::trace_fail(n, n - 1, "record is not an object");
        try {
            if (!have_header) {
                if (!j.contains("version") || !j["version"].is_number_integer())
                    detail::trace_fail(n, n - 1, "missing header");
                const int v = j["version"].get<int>();
                if (v != trace_version)
                    throw trace_error("unsupported trace version " + std::to_string(v) + " (expected " +
                                      std::to_string(trace_version) + ")");
                t.header.version = v;
                t.header.seed = j.at("seed").get<std::uint64_t>();
                t.header.mode = j.at("mode").get<std::string>();
                t.header.cycle_length_ms = j.at("cycle_length_ms").get<std::int64_t>();
                have_header = true;
                continue;
            }
            TraceEvent e;
            e.cycle = j.at("cycle").get<std::int64_t>();
            e.seq = j.at("seq").get<std::uint64_t>();
            e.kind = j.at("kind").get<std::string>();
            e.data = j.at("data");
            if (!known_event_kind(e.kind))
                detail::trace_fail(n, n - 1, "unknown event kind '" + e.kind + "'");
            if (e.seq != t.events.size())
                detail::trace_fail(n, n - 1, "sequence number out of order");
            if (!t.events.empty() && e.cycle < t.events.back().cycle)
                detail::trace_fail(n, n - 1, "cycle goes backwards");
            t.events.push_back(std::move(e));
        } catch (const json::exception& e) {
            detail::trace_fail(n, n - 1, std::string("bad field: ") + e.what());
        }
    }
    if (!have_header)
        throw trace_error("empty trace: no header line");
    return t;
}

inline Trace read_trace(const std::string& text) {
    std::istringstream s(text);
    return read_trace(s);
}

} // namespace mmarch
