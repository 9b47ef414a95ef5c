#pragma once

// Shadow production systems: peripheral rule engines that read anything in
// WM and their subscribed MM tags but write only the one buffer they own.
// Deposits that the central system goes on to use are recorded so that a
// later central reward can be passed back to the shadow productions that
// supplied the information.

#include <functional>
#include <optional>
#include <vector>

#include "mmarch/production.hpp"

namespace mmarch {

struct ShadowSystem {
    Symbol name;
    Symbol buffer;
    std::vector<Symbol> subscriptions;
    std::vector<Production> productions;
    std::int64_t period = 1;       // stepped on cycles divisible by period
    bool form_productions = false; // may grow retrieval productions from MM

    bool operator==(const ShadowSystem&) const = default;
};

inline const Symbol& retrieval_failure_type() {
    static const Symbol s{"retrieval-failure"};
    return s;
}

// Answers a query waiting in the system's own buffer from its subscribed MM
// tags: the completed chunk on success, a retrieval-failure chunk otherwise.
inline std::optional<BufferOp> answer_query(const ShadowSystem& sys, const WorkingMemory& wm,
                                            const MiddleMemory& mm, const ActivationTable& acts,
                                            std::optional<EntryId>* answered_from = nullptr) {
    const Buffer& own = wm.at(sys.buffer);
    if (!own.query)
        return std::nullopt;
    const Query& q = own.query->query;
    auto top = mm_retrieve(mm, acts, &q, sys.subscriptions, 1);
    BufferOp op{WriteOp::write, sys.buffer, std::nullopt, std::nullopt, false};
    if (top.empty()) {
        op.chunk = Chunk{retrieval_failure_type(),
                         {{Symbol("query-id"), Symbol(std::to_string(own.query->id))}},
                         0};
    } else {
        const Chunk& found = *mm.at(top.front().id).chunk;
        op.chunk = complete_query(q, *match_query(q, found));
        if (answered_from)
            *answered_from = top.front().id;
    }
    return op;
}

// Urgent write into the system's own buffer; the central engine sees it on
// the next cycle and matches that read it take precedence in resolution.
inline WmWrite interrupt(const ShadowSystem& sys, Chunk chunk, WorkingMemory& wm) {
    return wm_write(wm, sys.name, sys.buffer, std::move(chunk), true);
}

struct ShadowOutcome {
    enum class Kind { idle, fired, answered };
    Kind kind = Kind::idle;
    Symbol production; // fired production
    Bindings bindings;
    std::vector<EntryId> mm_entries;
    std::optional<EntryId> answered_from;
    Firing firing;
};

// One step of one shadow system against a WM snapshot. At most one production
// fires; the resulting writes are returned for the caller to commit.
inline ShadowOutcome shadow_step(ShadowSystem& sys, const WorkingMemory& wm, const MiddleMemory& mm,
                                 const ActivationTable& acts, Millis now) {
    ShadowOutcome out;
    if (auto op = answer_query(sys, wm, mm, acts, &out.answered_from)) {
        out.kind = ShadowOutcome::Kind::answered;
        out.firing.ops.push_back(std::move(*op));
        return out;
    }
    MatchSurface surface{wm, &mm, &acts, sys.subscriptions, nullptr};
    auto conflict = match_all(sys.productions, surface);
    auto winner = resolve(conflict, sys.productions, false);
    if (!winner)
        return out;
    const Match& m = conflict[*winner];
    Production& p = sys.productions[m.production];
    out.kind = ShadowOutcome::Kind::fired;
    out.production = p.name;
    out.bindings = m.bindings;
    out.mm_entries = m.mm_entries;
    out.firing = fire(p, m.bindings, now);
    for (const auto& op : out.firing.ops)
        if (op.buffer != sys.buffer)
            throw ownership_violation(sys.name.str(), op.buffer.str());
    return out;
}

struct Contribution {
    Symbol system;
    Symbol production;
    Symbol buffer;
    ChunkId chunk = 0;
    std::int64_t deposit_cycle = 0;
    Millis deposit_time = 0;
    std::optional<std::int64_t> consumed_cycle;
};

struct ContributionLedger {
    std::vector<Contribution> records;

    void deposit(Contribution c) { records.push_back(std::move(c)); }

    // Unconsumed deposits whose chunk has left its buffer can never be used
    // any more. Call once the cycle's central match is over.
    std::size_t retire_stale(const WorkingMemory& wm) {
        return std::erase_if(records, [&](const Contribution& r) {
            if (r.consumed_cycle)
                return false;
            const Buffer* b = wm.find(r.buffer);
            return !b || !b->content || b->content->id != r.chunk;
        });
    }
};

// Marks the deposits a central firing used. A deposit is consumed at most once.
inline std::vector<Contribution> record_consumption(ContributionLedger& ledger,
                                                    std::span<const std::pair<Symbol, ChunkId>> used,
                                                    std::int64_t cycle) {
    std::vector<Contribution> out;
    for (auto& r : ledger.records) {
        if (r.consumed_cycle)
            continue;
        for (const auto& [buffer, chunk] : used)
            if (r.buffer == buffer && r.chunk == chunk) {
                r.consumed_cycle = cycle;
                out.push_back(r);
                break;
            }
    }
    return out;
}

using ProductionLookup = std::function<Production*(const Symbol& system, const Symbol& production)>;

// Same TD update as the central learner, once per consumed deposit, with the
// effective reward discounted from the deposit time. Consumed records are cleared.
inline std::vector<UtilityUpdate> propagate_credit(ContributionLedger& ledger, double reward,
                                                   Millis reward_time, double alpha, double time_cost,
                                                   const ProductionLookup& lookup) {
    std::vector<UtilityUpdate> out;
    for (const auto& r : ledger.records) {
        if (!r.consumed_cycle)
            continue;
        if (Production* p = lookup(r.system, r.production))
            out.push_back(td_update(*p, alpha, time_cost, reward, reward_time, r.deposit_time));
    }
    std::erase_if(ledger.records, [](const Contribution& r) { return r.consumed_cycle.has_value(); });
    return out;
}

} // namespace mmarch
