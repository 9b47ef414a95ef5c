#pragma once

// Run metrics, computed from the trace alone so they can be recomputed
// offline from a trace file.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "mmarch/trace.hpp"

namespace mmarch {

struct UtilityPoint {
    std::int64_t cycle = 0;
    double utility = 0.0;
    bool operator==(const UtilityPoint&) const = default;
};

struct RunMetrics {
    std::int64_t cycles = 0;
    std::vector<std::uint64_t> candidates; // central match tests, one per cycle
    double candidates_mean = 0.0;
    std::uint64_t candidates_max = 0;
    std::uint64_t central_fires = 0;
    std::uint64_t idle_cycles = 0;
    std::uint64_t seriality_violations = 0; // cycles with more than one central fire
    std::vector<std::int64_t> interrupt_latencies;
    std::uint64_t unanswered_interrupts = 0;
    std::vector<std::pair<std::int64_t, std::uint64_t>> mm_size; // (cycle, entries) at each tick
    std::map<std::string, std::vector<UtilityPoint>> utilities;  // "owner/production"
    std::map<std::string, std::uint64_t> consumption;           // per shadow system
    std::uint64_t deposits = 0;
    std::uint64_t forgotten = 0;
    std::string halt_reason;
};

inline RunMetrics compute_metrics(const Trace& t) {
    RunMetrics m;
    std::map<std::int64_t, std::uint64_t> fires_per_cycle;
    std::map<std::uint64_t, std::int64_t> open_interrupts; // chunk id -> cycle
    for (const auto& e : t.events) {
        const json& d = e.data;
        if (e.kind == "match") {
            m.candidates.push_back(d.at("candidates").get<std::uint64_t>());
            for (const auto& c : d.at("conflict")) {
                for (const auto& used : c.at("wm")) {
                    auto it = open_interrupts.find(used.at(1).get<std::uint64_t>());
                    if (it != open_interrupts.end()) {
                        m.interrupt_latencies.push_back(e.cycle - it->second);
                        open_interrupts.erase(it);
                    }
                }
            }
        } else if (e.kind == "central-fire") {
            ++m.central_fires;
            ++fires_per_cycle[e.cycle];
        } else if (e.kind == "idle") {
            ++m.idle_cycles;
        } else if (e.kind == "interrupt") {
            open_interrupts.emplace(d.at("chunk").get<std::uint64_t>(), e.cycle);
        } else if (e.kind == "tick") {
            ++m.cycles;
            m.mm_size.emplace_back(e.cycle, d.at("mm_size").get<std::uint64_t>());
        } else if (e.kind == "utility-update") {
            m.utilities[d.at("owner").get<std::string>() + "/" + d.at("production").get<std::string>()]
                .push_back({e.cycle, d.at("after").get<double>()});
        } else if (e.kind == "consume") {
            ++m.consumption[d.at("system").get<std::string>()];
        } else if (e.kind == "deposit") {
            ++m.deposits;
        } else if (e.kind == "forget") {
            ++m.forgotten;
        } else if (e.kind == "halt") {
            m.halt_reason = d.at("reason").get<std::string>();
        }
    }
    for (const auto& [_, n] : fires_per_cycle)
        m.seriality_violations += n > 1;
    m.unanswered_interrupts = open_interrupts.size();
    if (!m.candidates.empty()) {
        std::uint64_t sum = 0;
        for (auto c : m.candidates) {
            sum += c;
            m.candidates_max = std::max(m.candidates_max, c);
        }
        m.candidates_mean = static_cast<double>(sum) / static_cast<double>(m.candidates.size());
    }
    return m;
}

inline json metrics_to_json(const RunMetrics& m) {
    json utilities = json::object();
    for (const auto& [k, pts] : m.utilities) {
        json arr = json::array();
        for (const auto& p : pts)
            arr.push_back(json::array({p.cycle, p.utility}));
        utilities[k] = std::move(arr);
    }
    json mm_size = json::array();
    for (const auto& [c, n] : m.mm_size)
        mm_size.push_back(json::array({c, n}));
    json consumption = json::object();
    for (const auto& [k, n] : m.consumption)
        consumption[k] = n;
    return json{{"cycles", m.cycles},
                {"central_candidates", {{"mean", m.candidates_mean}, {"max", m.candidates_max},
                                        {"per_cycle", m.candidates}}},
                {"central_fires", m.central_fires},
                {"idle_cycles", m.idle_cycles},
                {"seriality_violations", m.seriality_violations},
                {"interrupt_latencies", m.interrupt_latencies},
                {"unanswered_interrupts", m.unanswered_interrupts},
                {"mm_size", std::move(mm_size)},
                {"utilities", std::move(utilities)},
                {"consumption", std::move(consumption)},
                {"deposits", m.deposits},
                {"forgotten", m.forgotten},
                {"halt_reason", m.halt_reason}};
}

} // namespace mmarch
