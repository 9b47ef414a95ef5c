#pragma once

// Productions: binary matching against WM buffers and middle memory,
// utility-based conflict resolution, firing, TD utility learning, and the
// formation and pruning of provisional retrieval productions.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mmarch/chunk.hpp"
#include "mmarch/middle_memory.hpp"
#include "mmarch/working_memory.hpp"

namespace mmarch {

struct Condition {
    std::optional<Symbol> buffer; // WM condition when set
    std::vector<Symbol> mm_tags;  // MM condition otherwise; empty = owner's subscriptions
    Query pattern;
    bool negated = false;

    bool on_mm() const { return !buffer.has_value(); }
    bool operator==(const Condition&) const = default;
};

enum class ActionKind { write_buffer, clear_buffer, post_query, emit_reward, halt };

inline const char* to_string(ActionKind k) {
    switch (k) {
    case ActionKind::write_buffer: return "write-buffer";
    case ActionKind::clear_buffer: return "clear-buffer";
    case ActionKind::post_query: return "post-query";
    case ActionKind::emit_reward: return "emit-reward";
    case ActionKind::halt: return "halt";
    }
    return "?";
}

inline std::optional<ActionKind> parse_action_kind(std::string_view s) {
    for (auto k : {ActionKind::write_buffer, ActionKind::clear_buffer, ActionKind::post_query,
                   ActionKind::emit_reward, ActionKind::halt})
        if (s == to_string(k))
            return k;
    return std::nullopt;
}

struct Action {
    ActionKind kind = ActionKind::write_buffer;
    std::optional<Symbol> buffer;  // write / clear / post-query target
    std::optional<Query> tmpl;     // chunk template (write) or query template (post-query)
    double reward = 0.0;           // emit-reward
    bool urgent = false;           // write-buffer as an interrupt

    bool operator==(const Action&) const = default;
};

struct Production {
    Symbol name;
    Symbol owner; // "central" or a shadow system
    std::vector<Condition> conditions;
    std::vector<Action> actions;
    double utility = 0.0;
    bool permanent = true;
    Millis created_at = 0; // meaningful for provisional productions
    std::vector<Millis> fired_at;

    bool operator==(const Production&) const = default;
};

using Inflow = std::map<Symbol, std::vector<Chunk>>;

// What a production system can see while matching.
struct MatchSurface {
    const WorkingMemory& wm;
    const MiddleMemory* mm = nullptr;
    const ActivationTable* activations = nullptr;
    std::span<const Symbol> subscriptions;
    const Inflow* inflow = nullptr; // pipeline mode: unfiltered arrivals per buffer
};

struct Match {
    std::size_t production = 0; // index into the matched span
    Bindings bindings;
    std::vector<std::pair<Symbol, ChunkId>> wm_chunks; // buffer contents used by positive conditions
    std::vector<EntryId> mm_entries;
    bool urgent = false; // a positive condition matched an urgent buffer
};

struct MatchStats {
    std::size_t candidates = 0; // (production, content) tests evaluated
};

namespace detail {

inline void merge(Bindings& into, const Bindings& from) {
    for (const auto& [k, v] : from)
        into.emplace(k, v);
}

// Evaluates conditions in order, substituting earlier bindings into later
// patterns. Stops at the first failing condition.
inline std::optional<Match> match_one(const Production& p, std::size_t index, const MatchSurface& s,
                                      MatchStats* stats) {
    Match m;
    m.production = index;
    for (const auto& c : p.conditions) {
        const Query pattern = substitute(c.pattern, m.bindings);
        if (c.on_mm()) {
            if (!s.mm || !s.activations)
                return std::nullopt;
            std::span<const Symbol> tags = c.mm_tags.empty() ? s.subscriptions : std::span<const Symbol>(c.mm_tags);
            auto top = mm_retrieve(*s.mm, *s.activations, &pattern, tags, 1);
            if (stats)
                ++stats->candidates;
            if (c.negated) {
                if (!top.empty())
                    return std::nullopt;
                continue;
            }
            if (top.empty())
                return std::nullopt;
            merge(m.bindings, *match_pattern(pattern, *s.mm->at(top.front().id).chunk));
            m.mm_entries.push_back(top.front().id);
            continue;
        }

        const Buffer& buf = s.wm.at(*c.buffer);
        std::optional<Bindings> found;
        bool from_content = false;
        if (buf.content) {
            if (stats)
                ++stats->candidates;
            if ((found = match_pattern(pattern, *buf.content)))
                from_content = true;
        }
        if (!found && s.inflow) {
            if (auto it = s.inflow->find(*c.buffer); it != s.inflow->end()) {
                for (auto rit = it->second.rbegin(); rit != it->second.rend() && !found; ++rit) {
                    if (buf.content && rit->id == buf.content->id)
                        continue;
                    if (stats)
                        ++stats->candidates;
                    found = match_pattern(pattern, *rit);
                }
            }
        }
        if (c.negated) {
            if (found)
                return std::nullopt;
            continue;
        }
        if (!found)
            return std::nullopt;
        merge(m.bindings, *found);
        if (from_content) {
            m.wm_chunks.emplace_back(buf.name, buf.content->id);
            m.urgent = m.urgent || buf.urgent;
        }
    }
    return m;
}

} // namespace detail

// Conflict set: every production whose conditions all hold. Matching is
// strictly binary; MM conditions bind from the single top-ranked entry.
inline std::vector<Match> match_all(std::span<const Production> productions, const MatchSurface& s,
                                    MatchStats* stats = nullptr) {
    std::vector<Match> out;
    for (std::size_t i = 0; i < productions.size(); ++i)
        if (auto m = detail::match_one(productions[i], i, s, stats))
            out.push_back(std::move(*m));
    return out;
}

// Highest utility wins; exact ties go to the lexicographically smallest name.
// With `honor_urgency`, matches that read an urgent buffer preempt the rest.
inline std::optional<std::size_t> resolve(std::span<const Match> conflict_set,
                                          std::span<const Production> productions,
                                          bool honor_urgency = true) {
    const bool any_urgent =
        honor_urgency && std::any_of(conflict_set.begin(), conflict_set.end(),
                                     [](const Match& m) { return m.urgent; });
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < conflict_set.size(); ++i) {
        if (any_urgent && !conflict_set[i].urgent)
            continue;
        if (!best) {
            best = i;
            continue;
        }
        const Production& a = productions[conflict_set[i].production];
        const Production& b = productions[conflict_set[*best].production];
        if (a.utility > b.utility || (a.utility == b.utility && a.name < b.name))
            best = i;
    }
    return best;
}

struct BufferOp {
    WriteOp op = WriteOp::write;
    Symbol buffer;
    std::optional<Chunk> chunk; // id 0; the committer assigns ids
    std::optional<Query> query;
    bool urgent = false;
};

struct Firing {
    std::vector<BufferOp> ops;
    std::vector<double> rewards;
    bool halt = false;
};

// Instantiates the production's actions in order and records the fire time.
inline Firing fire(Production& p, const Bindings& bindings, Millis now) {
    Firing f;
    try {
        for (const auto& a : p.actions) {
            switch (a.kind) {
            case ActionKind::write_buffer:
                f.ops.push_back({WriteOp::write, *a.buffer, instantiate(*a.tmpl, bindings), std::nullopt,
                                 a.urgent});
                break;
            case ActionKind::clear_buffer:
                f.ops.push_back({WriteOp::clear, *a.buffer, std::nullopt, std::nullopt, false});
                break;
            case ActionKind::post_query: {
                Query q = substitute(*a.tmpl, bindings);
                auto left = q.variables();
                if (!left.empty())
                    throw model_error("unbound reference ?" + left.front());
                f.ops.push_back({WriteOp::query, *a.buffer, std::nullopt, std::move(q), false});
                break;
            }
            case ActionKind::emit_reward:
                f.rewards.push_back(a.reward);
                break;
            case ActionKind::halt:
                f.halt = true;
                break;
            }
        }
    } catch (const model_error& e) {
        throw model_error("production '" + p.name.str() + "': " + e.what());
    }
    p.fired_at.push_back(now);
    return f;
}

inline Production* find_production(std::span<Production> ps, const Symbol& name) {
    for (auto& p : ps)
        if (p.name == name)
            return &p;
    return nullptr;
}

struct UtilityLearner {
    struct Pending {
        Symbol production;
        Millis fired_at = 0;
    };

    double alpha = 0.2;
    double time_cost = 0.0; // reward lost per second between firing and reward
    std::vector<Pending> pending;

    void record(const Symbol& production, Millis t) { pending.push_back({production, t}); }
};

struct UtilityUpdate {
    Symbol production;
    Symbol owner;
    double before = 0.0;
    double after = 0.0;
    double effective_reward = 0.0;
    bool permanent = true;
};

// U <- U + alpha (R_i - U), with R_i = R - rho (t_reward - t_fire). A positive
// R_i makes a provisional production permanent.
inline UtilityUpdate td_update(Production& p, double alpha, double time_cost, double reward,
                               Millis reward_time, Millis credited_at) {
    const double effective = reward - time_cost * seconds(reward_time - credited_at);
    UtilityUpdate u{p.name, p.owner, p.utility, 0.0, effective, false};
    p.utility += alpha * (effective - p.utility);
    if (effective > 0.0)
        p.permanent = true;
    u.after = p.utility;
    u.permanent = p.permanent;
    return u;
}

inline std::vector<UtilityUpdate> update_utilities(UtilityLearner& learner, std::span<Production> productions,
                                                   double reward, Millis reward_time) {
    if (!std::isfinite(reward))
        throw invalid_argument("reward must be finite");
    std::vector<UtilityUpdate> out;
    for (const auto& f : learner.pending)
        if (Production* p = find_production(productions, f.production))
            out.push_back(td_update(*p, learner.alpha, learner.time_cost, reward, reward_time, f.fired_at));
    learner.pending.clear();
    return out;
}

inline std::string retrieval_production_name(EntryId id) { return "retrieve-" + std::to_string(id); }

// A provisional shadow production that re-retrieves a highly active entry
// into `buffer`, unless the owner already has one for the same pattern.
inline std::optional<Production> form_retrieval_production(const MMEntry& entry, double activation,
                                                           const Symbol& system, const Symbol& buffer,
                                                           double threshold,
                                                           std::span<const Production> existing,
                                                           Millis now) {
    if (activation <= threshold || !entry.chunk)
        return std::nullopt;
    const Query pattern = exact_query(*entry.chunk);
    for (const auto& p : existing) {
        if (p.owner != system)
            continue;
        for (const auto& c : p.conditions)
            if (c.on_mm() && !c.negated && c.pattern == pattern &&
                c.mm_tags == std::vector<Symbol>{entry.tag})
                return std::nullopt;
    }
    Production p;
    p.name = Symbol(retrieval_production_name(entry.id));
    p.owner = system;
    p.conditions.push_back(Condition{std::nullopt, {entry.tag}, pattern, false});
    p.actions.push_back(Action{ActionKind::write_buffer, buffer, pattern, 0.0, false});
    p.utility = 0.0;
    p.permanent = false;
    p.created_at = now;
    return p;
}

struct Pruned {
    Symbol production;
    Symbol owner;
    Millis age = 0;
};

// Drops provisional productions older than `ttl` whose utility is not positive.
inline std::vector<Pruned> prune_provisional(std::vector<Production>& ps, Millis now, Millis ttl) {
    if (ttl <= 0)
        throw invalid_argument("ttl must be positive");
    std::vector<Pruned> out;
    std::erase_if(ps, [&](const Production& p) {
        const Millis age = now - p.created_at;
        if (p.permanent || age <= ttl || p.utility > 0.0)
            return false;
        out.push_back({p.name, p.owner, age});
        return true;
    });
    return out;
}

} // namespace mmarch
