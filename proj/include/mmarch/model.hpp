#pragma once

// Model definition files: parsing, validation and canonical serialisation.
// Every problem is reported with a path into the document, e.g.
//   shadow_systems[1].productions[2].actions[0]: write-one rule: ...

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mmarch/json_io.hpp"
#include "mmarch/predictors.hpp"
#include "mmarch/shadow.hpp"

namespace mmarch {

struct BufferDecl {
    Symbol name;
    Symbol owner;
    bool operator==(const BufferDecl&) const = default;
};

struct InitialWm {
    Symbol buffer;
    Chunk chunk;
    bool operator==(const InitialWm&) const = default;
};

struct InitialMm {
    Symbol tag;
    Chunk chunk;
    std::vector<Millis> presentations_ms; // strictly before the run starts
    std::vector<std::size_t> links;       // indices into initial mm
    bool operator==(const InitialMm&) const = default;
};

struct ScheduledReward {
    std::int64_t cycle = 0;
    double value = 0.0;
    bool operator==(const ScheduledReward&) const = default;
};

// Enters the ingestion queue at the end of `cycle`, like a prediction.
struct ScriptedDeposit {
    std::int64_t cycle = 0;
    Symbol tag;
    Chunk chunk;
    bool operator==(const ScriptedDeposit&) const = default;
};

struct MiddleMemoryConfig {
    double decay = 0.5;
    double spreading = 1.0;
    double retrieval_threshold = -1.0;
    double forgetting_threshold = -2.5;
    double noise = 0.0;
    double formation_threshold = 2.0;
    double cleanup_threshold = default_cleanup_threshold;
    double wm_weight = 1.0;
    std::int64_t context_symbols = 5;
    bool operator==(const MiddleMemoryConfig&) const = default;
};

struct LearningConfig {
    double alpha = 0.2;
    double time_cost = 0.0;
    Millis ttl_ms = 60000;
    bool operator==(const LearningConfig&) const = default;
};

struct ModelDefinition {
    std::string name;
    std::size_t dimension = 1024;
    std::uint64_t codebook_seed = 0;
    Millis cycle_length_ms = 50;
    std::size_t wm_capacity = WorkingMemory::default_capacity;
    std::vector<BufferDecl> buffers;
    std::vector<ShadowSystem> shadow_systems;
    std::vector<Production> central_productions;
    std::vector<PredictorBinding> predictors;
    MiddleMemoryConfig middle_memory;
    LearningConfig learning;
    std::vector<ScheduledReward> rewards;
    std::vector<InitialWm> initial_wm;
    std::vector<InitialMm> initial_mm;
    std::vector<ScriptedDeposit> scripted_deposits;

    bool operator==(const ModelDefinition&) const = default;
};

inline const Symbol& script_source() {
    static const Symbol s{"script"};
    return s;
}

struct Diagnostic {
    std::string path;
    std::string message;
};

inline std::string format_diagnostics(const std::vector<Diagnostic>& ds) {
    std::string out;
    for (const auto& d : ds)
        out += (d.path.empty() ? std::string("model") : d.path) + ": " + d.message + "\n";
    return out;
}

struct model_invalid : error {
    explicit model_invalid(std::vector<Diagnostic> ds)
        : error("invalid model:\n" + format_diagnostics(ds)), diagnostics(std::move(ds)) {}
    std::vector<Diagnostic> diagnostics;
};

namespace detail {

inline std::string at_index(const std::string& path, const char* key, std::size_t i) {
    return (path.empty() ? std::string(key) : path + "." + key) + "[" + std::to_string(i) + "]";
}

inline std::string at_key(const std::string& path, const char* key) {
    return path.empty() ? std::string(key) : path + "." + key;
}

// Structural reader: type errors and unknown fields are recorded, not thrown,
// so one pass reports every problem.
class ModelReader {
public:
    std::vector<Diagnostic> diags;

    void report(const std::string& path, std::string msg) { diags.push_back({path, std::move(msg)}); }

    bool object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!j.is_object()) {
            report(path, "expected an object");
            return false;
        }
        for (const auto& [k, _] : j.items())
            if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }) ==
                allowed.end())
                report(at_key(path, k.c_str()), "unknown field");
        return true;
    }

    const json* array(const json& j, const char* key, const std::string& path) {
        if (!j.contains(key))
            return nullptr;
        if (!j.at(key).is_array()) {
            report(at_key(path, key), "expected an array");
            return nullptr;
        }
        return &j.at(key);
    }

    double number(const json& j, const char* key, double def, const std::string& path) {
        if (!j.contains(key))
            return def;
        const json& v = j.at(key);
        if (!v.is_number()) {
            report(at_key(path, key), "expected a number");
            return def;
        }
        double d = v.get<double>();
        if (!std::isfinite(d)) {
            report(at_key(path, key), "must be finite");
            return def;
        }
        return d;
    }

    std::int64_t integer(const json& j, const char* key, std::int64_t def, const std::string& path) {
        if (!j.contains(key))
            return def;
        const json& v = j.at(key);
        if (!v.is_number_integer()) {
            report(at_key(path, key), "expected an integer");
            return def;
        }
        return v.get<std::int64_t>();
    }

    std::uint64_t unsigned_integer(const json& j, const char* key, std::uint64_t def, const std::string& path) {
        if (!j.contains(key))
            return def;
        const json& v = j.at(key);
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            report(at_key(path, key), "expected a non-negative integer");
            return def;
        }
        return v.is_number_unsigned() ? v.get<std::uint64_t>() : static_cast<std::uint64_t>(v.get<std::int64_t>());
    }

    bool boolean(const json& j, const char* key, bool def, const std::string& path) {
        if (!j.contains(key))
            return def;
        if (!j.at(key).is_boolean()) {
            report(at_key(path, key), "expected true or false");
            return def;
        }
        return j.at(key).get<bool>();
    }

    std::string string(const json& j, const char* key, std::string def, const std::string& path) {
        if (!j.contains(key))
            return def;
        if (!j.at(key).is_string()) {
            report(at_key(path, key), "expected a string");
            return def;
        }
        return j.at(key).get<std::string>();
    }

    std::optional<Symbol> symbol_value(const json& v, const std::string& path) {
        if (!v.is_string()) {
            report(path, "expected a symbol");
            return std::nullopt;
        }
        if (!Symbol::valid(v.get<std::string>())) {
            report(path, "invalid symbol '" + v.get<std::string>() + "'");
            return std::nullopt;
        }
        return Symbol(v.get<std::string>());
    }

    std::optional<Symbol> symbol(const json& j, const char* key, const std::string& path, bool required = true) {
        if (!j.contains(key)) {
            if (required)
                report(at_key(path, key), "missing");
            return std::nullopt;
        }
        return symbol_value(j.at(key), at_key(path, key));
    }

    std::vector<Symbol> symbols(const json& j, const char* key, const std::string& path) {
        std::vector<Symbol> out;
        if (const json* a = array(j, key, path))
            for (std::size_t i = 0; i < a->size(); ++i)
                if (auto s = symbol_value((*a)[i], at_index(path, key, i)))
                    out.push_back(*s);
        return out;
    }

    std::optional<Query> pattern(const json& j, const char* key, const std::string& path, bool required = true) {
        if (!j.contains(key)) {
            if (required)
                report(at_key(path, key), "missing");
            return std::nullopt;
        }
        const std::string p = at_key(path, key);
        if (!object(j.at(key), p, {"isa", "slots"}))
            return std::nullopt;
        try {
            return query_from_json(j.at(key));
        } catch (const error& e) {
            report(p, e.what());
            return std::nullopt;
        }
    }

    std::optional<Chunk> chunk(const json& j, const char* key, const std::string& path) {
        auto q = pattern(j, key, path);
        if (!q)
            return std::nullopt;
        if (q->wildcard_count() != 0) {
            report(at_key(path, key), "a chunk may not contain wildcards");
            return std::nullopt;
        }
        return instantiate(*q, {});
    }
};

inline Condition read_condition(ModelReader& r, const json& j, const std::string& path) {
    Condition c;
    if (!r.object(j, path, {"buffer", "mm", "pattern", "negated"}))
        return c;
    c.buffer = r.symbol(j, "buffer", path, false);
    if (j.contains("mm")) {
        c.mm_tags = r.symbols(j, "mm", path);
        if (c.buffer)
            r.report(path, "a condition reads either a buffer or middle memory, not both");
    } else if (!j.contains("buffer")) {
        r.report(path, "a condition needs \"buffer\" or \"mm\"");
    }
    if (auto q = r.pattern(j, "pattern", path))
        c.pattern = *q;
    c.negated = r.boolean(j, "negated", false, path);
    return c;
}

inline Action read_action(ModelReader& r, const json& j, const std::string& path) {
    Action a;
    if (!r.object(j, path, {"kind", "buffer", "chunk", "query", "urgent", "value"}))
        return a;
    const std::string kind = r.string(j, "kind", "", path);
    if (auto k = parse_action_kind(kind))
        a.kind = *k;
    else
        r.report(at_key(path, "kind"), "unknown action kind '" + kind + "'");
    a.buffer = r.symbol(j, "buffer", path, false);
    if (j.contains("chunk"))
        a.tmpl = r.pattern(j, "chunk", path);
    if (j.contains("query")) {
        if (a.tmpl)
            r.report(path, "an action has either a chunk or a query template");
        a.tmpl = r.pattern(j, "query", path);
    }
    a.urgent = r.boolean(j, "urgent", false, path);
    a.reward = r.number(j, "value", 0.0, path);
    return a;
}

inline Production read_production(ModelReader& r, const json& j, const std::string& path, const Symbol& owner) {
    Production p;
    p.owner = owner;
    if (!r.object(j, path, {"name", "utility", "permanent", "conditions", "actions"}))
        return p;
    if (auto n = r.symbol(j, "name", path))
        p.name = *n;
    p.utility = r.number(j, "utility", 0.0, path);
    p.permanent = r.boolean(j, "permanent", true, path);
    if (const json* cs = r.array(j, "conditions", path))
        for (std::size_t i = 0; i < cs->size(); ++i)
            p.conditions.push_back(read_condition(r, (*cs)[i], at_index(path, "conditions", i)));
    if (const json* as = r.array(j, "actions", path))
        for (std::size_t i = 0; i < as->size(); ++i)
            p.actions.push_back(read_action(r, (*as)[i], at_index(path, "actions", i)));
    return p;
}

inline std::vector<Symbol> split_words(const std::string& text, ModelReader& r, const std::string& path) {
    std::vector<Symbol> out;
    std::istringstream s(text);
    for (std::string w; s >> w;) {
        if (Symbol::valid(w))
            out.emplace_back(w);
        else
            r.report(path, "invalid symbol '" + w + "'");
    }
    return out;
}

inline PredictorBinding read_predictor(ModelReader& r, const json& j, const std::string& path) {
    PredictorBinding b;
    if (!r.object(j, path, {"name", "kind", "tag", "rate", "seed", "order", "corpus", "pairs", "chunk_type",
                            "buffer", "command", "endpoint"}))
        return b;
    if (auto n = r.symbol(j, "name", path))
        b.name = *n;
    if (auto t = r.symbol(j, "tag", path))
        b.tag = *t;
    const std::string kind = r.string(j, "kind", "", path);
    if (auto k = parse_predictor_kind(kind))
        b.kind = *k;
    else
        r.report(at_key(path, "kind"), "unknown predictor kind '" + kind + "'");
    b.rate = r.integer(j, "rate", 1, path);
    b.seed = r.unsigned_integer(j, "seed", 0, path);
    b.order = r.integer(j, "order", 2, path);
    if (const json* c = r.array(j, "corpus", path))
        for (std::size_t i = 0; i < c->size(); ++i) {
            const std::string p = at_index(path, "corpus", i);
            if (!(*c)[i].is_string())
                r.report(p, "expected a string of space-separated symbols");
            else
                b.corpus.push_back(split_words((*c)[i].get<std::string>(), r, p));
        }
    if (const json* ps = r.array(j, "pairs", path))
        for (std::size_t i = 0; i < ps->size(); ++i) {
            const std::string p = at_index(path, "pairs", i);
            const json& e = (*ps)[i];
            if (!r.object(e, p, {"cue", "associate", "count"}))
                continue;
            auto cue = r.symbol(e, "cue", p);
            auto assoc = r.symbol(e, "associate", p);
            auto count = r.unsigned_integer(e, "count", 1, p);
            if (cue && assoc)
                b.pairs.push_back({*cue, *assoc, count});
        }
    b.chunk_type = r.symbol(j, "chunk_type", path, false);
    b.buffer = r.symbol(j, "buffer", path, false);
    if (const json* c = r.array(j, "command", path))
        for (std::size_t i = 0; i < c->size(); ++i) {
            if ((*c)[i].is_string())
                b.command.push_back((*c)[i].get<std::string>());
            else
                r.report(at_index(path, "command", i), "expected a string");
        }
    b.endpoint = r.string(j, "endpoint", "", path);
    return b;
}

} // namespace detail

// Builds a model from JSON without semantic checks. Throws model_invalid on
// structural problems (wrong types, unknown fields, bad symbols).
inline ModelDefinition parse_model(const json& j) {
    detail::ModelReader r;
    ModelDefinition m;
    if (!r.object(j, "", {"name", "codebook", "clock", "wm_capacity", "buffers", "shadow_systems",
                          "central_productions", "predictors", "middle_memory", "learning", "rewards",
                          "initial", "scripted_deposits"}))
        throw model_invalid(std::move(r.diags));
    m.name = r.string(j, "name", "", "");
    if (j.contains("codebook") && r.object(j["codebook"], "codebook", {"dimension", "seed"})) {
        m.dimension = r.unsigned_integer(j["codebook"], "dimension", m.dimension, "codebook");
        m.codebook_seed = r.unsigned_integer(j["codebook"], "seed", 0, "codebook");
    }
    if (j.contains("clock") && r.object(j["clock"], "clock", {"cycle_length_ms"}))
        m.cycle_length_ms = r.integer(j["clock"], "cycle_length_ms", 50, "clock");
    m.wm_capacity = r.unsigned_integer(j, "wm_capacity", m.wm_capacity, "");

    if (const json* bs = r.array(j, "buffers", ""))
        for (std::size_t i = 0; i < bs->size(); ++i) {
            const std::string p = detail::at_index("", "buffers", i);
            if (!r.object((*bs)[i], p, {"name", "owner"}))
                continue;
            auto n = r.symbol((*bs)[i], "name", p);
            auto o = r.symbol((*bs)[i], "owner", p);
            if (n && o)
                m.buffers.push_back({*n, *o});
        }

    if (const json* ss = r.array(j, "shadow_systems", ""))
        for (std::size_t i = 0; i < ss->size(); ++i) {
            const std::string p = detail::at_index("", "shadow_systems", i);
            const json& e = (*ss)[i];
            ShadowSystem s;
            if (r.object(e, p, {"name", "buffer", "subscriptions", "period", "form_productions", "productions"})) {
                if (auto n = r.symbol(e, "name", p))
                    s.name = *n;
                if (auto b = r.symbol(e, "buffer", p))
                    s.buffer = *b;
                s.subscriptions = r.symbols(e, "subscriptions", p);
                s.period = r.integer(e, "period", 1, p);
                s.form_productions = r.boolean(e, "form_productions", false, p);
                if (const json* ps = r.array(e, "productions", p))
                    for (std::size_t k = 0; k < ps->size(); ++k)
                        s.productions.push_back(
                            detail::read_production(r, (*ps)[k], detail::at_index(p, "productions", k), s.name));
            }
            m.shadow_systems.push_back(std::move(s));
        }

    if (const json* cs = r.array(j, "central_productions", ""))
        for (std::size_t i = 0; i < cs->size(); ++i)
            m.central_productions.push_back(detail::read_production(
                r, (*cs)[i], detail::at_index("", "central_productions", i), central_owner()));

    if (const json* ps = r.array(j, "predictors", ""))
        for (std::size_t i = 0; i < ps->size(); ++i)
            m.predictors.push_back(detail::read_predictor(r, (*ps)[i], detail::at_index("", "predictors", i)));

    if (j.contains("middle_memory") &&
        r.object(j["middle_memory"], "middle_memory",
                 {"decay", "spreading", "retrieval_threshold", "forgetting_threshold", "noise",
                  "formation_threshold", "cleanup_threshold", "wm_weight", "context_symbols"})) {
        const json& e = j["middle_memory"];
        auto& c = m.middle_memory;
        const std::string p = "middle_memory";
        c.decay = r.number(e, "decay", c.decay, p);
        c.spreading = r.number(e, "spreading", c.spreading, p);
        c.retrieval_threshold = r.number(e, "retrieval_threshold", c.retrieval_threshold, p);
        c.forgetting_threshold = r.number(e, "forgetting_threshold", c.forgetting_threshold, p);
        c.noise = r.number(e, "noise", c.noise, p);
        c.formation_threshold = r.number(e, "formation_threshold", c.formation_threshold, p);
        c.cleanup_threshold = r.number(e, "cleanup_threshold", c.cleanup_threshold, p);
        c.wm_weight = r.number(e, "wm_weight", c.wm_weight, p);
        c.context_symbols = r.integer(e, "context_symbols", c.context_symbols, p);
    }

    if (j.contains("learning") && r.object(j["learning"], "learning", {"alpha", "time_cost", "ttl_ms"})) {
        const json& e = j["learning"];
        m.learning.alpha = r.number(e, "alpha", m.learning.alpha, "learning");
        m.learning.time_cost = r.number(e, "time_cost", m.learning.time_cost, "learning");
        m.learning.ttl_ms = r.integer(e, "ttl_ms", m.learning.ttl_ms, "learning");
    }

    if (const json* rs = r.array(j, "rewards", ""))
        for (std::size_t i = 0; i < rs->size(); ++i) {
            const std::string p = detail::at_index("", "rewards", i);
            if (!r.object((*rs)[i], p, {"cycle", "value"}))
                continue;
            m.rewards.push_back({r.integer((*rs)[i], "cycle", 0, p), r.number((*rs)[i], "value", 0.0, p)});
        }

    if (j.contains("initial") && r.object(j["initial"], "initial", {"wm", "mm"})) {
        const json& init = j["initial"];
        if (const json* ws = r.array(init, "wm", "initial"))
            for (std::size_t i = 0; i < ws->size(); ++i) {
                const std::string p = detail::at_index("initial", "wm", i);
                if (!r.object((*ws)[i], p, {"buffer", "chunk"}))
                    continue;
                auto b = r.symbol((*ws)[i], "buffer", p);
                auto c = r.chunk((*ws)[i], "chunk", p);
                if (b && c)
                    m.initial_wm.push_back({*b, *c});
            }
        if (const json* ms = r.array(init, "mm", "initial"))
            for (std::size_t i = 0; i < ms->size(); ++i) {
                const std::string p = detail::at_index("initial", "mm", i);
                const json& e = (*ms)[i];
                InitialMm entry;
                if (r.object(e, p, {"tag", "chunk", "presentations_ms", "links"})) {
                    if (auto t = r.symbol(e, "tag", p))
                        entry.tag = *t;
                    if (auto c = r.chunk(e, "chunk", p))
                        entry.chunk = *c;
                    if (const json* ts = r.array(e, "presentations_ms", p))
                        for (std::size_t k = 0; k < ts->size(); ++k) {
                            if ((*ts)[k].is_number_integer())
                                entry.presentations_ms.push_back((*ts)[k].get<Millis>());
                            else
                                r.report(detail::at_index(p, "presentations_ms", k), "expected an integer");
                        }
                    if (const json* ls = r.array(e, "links", p))
                        for (std::size_t k = 0; k < ls->size(); ++k) {
                            const json& l = (*ls)[k];
                            if (l.is_number_integer() && (l.is_number_unsigned() || l.get<std::int64_t>() >= 0))
                                entry.links.push_back(static_cast<std::size_t>(l.get<std::int64_t>()));
                            else
                                r.report(detail::at_index(p, "links", k), "expected an entry index");
                        }
                }
                m.initial_mm.push_back(std::move(entry));
            }
    }

    if (const json* ds = r.array(j, "scripted_deposits", ""))
        for (std::size_t i = 0; i < ds->size(); ++i) {
            const std::string p = detail::at_index("", "scripted_deposits", i);
            const json& e = (*ds)[i];
            if (!r.object(e, p, {"cycle", "tag", "chunk"}))
                continue;
            auto t = r.symbol(e, "tag", p);
            auto c = r.chunk(e, "chunk", p);
            if (t && c)
                m.scripted_deposits.push_back({r.integer(e, "cycle", 0, p), *t, *c});
        }

    if (!r.diags.empty())
        throw model_invalid(std::move(r.diags));
    return m;
}

namespace detail {

inline void check_production(const Production& p, const std::string& path, const ModelDefinition& m,
                             const ShadowSystem* sys, std::vector<Diagnostic>& out) {
    auto buffer_of = [&](const Symbol& name) -> const BufferDecl* {
        for (const auto& b : m.buffers)
            if (b.name == name)
                return &b;
        return nullptr;
    };

    std::set<std::string> bound;
    for (std::size_t i = 0; i < p.conditions.size(); ++i) {
        const Condition& c = p.conditions[i];
        const std::string cp = at_index(path, "conditions", i);
        if (c.buffer) {
            if (!buffer_of(*c.buffer))
                out.push_back({cp, "unknown buffer '" + c.buffer->str() + "'"});
        } else if (!sys) {
            out.push_back({cp, "central productions read working memory only; middle memory is reached through "
                               "shadow systems"});
        } else {
            for (const auto& t : c.mm_tags)
                if (std::find(sys->subscriptions.begin(), sys->subscriptions.end(), t) == sys->subscriptions.end())
                    out.push_back({cp, "tag '" + t.str() + "' is not among the system's subscriptions"});
        }
        if (!c.negated)
            for (const auto& v : c.pattern.variables())
                bound.insert(v);
    }

    for (std::size_t i = 0; i < p.actions.size(); ++i) {
        const Action& a = p.actions[i];
        const std::string ap = at_index(path, "actions", i);
        const bool targets_buffer = a.kind == ActionKind::write_buffer || a.kind == ActionKind::clear_buffer ||
                                    a.kind == ActionKind::post_query;
        if (sys && !targets_buffer) {
            out.push_back({ap, std::string("shadow systems may only write, clear or query their own buffer, not ") +
                                   to_string(a.kind)});
            continue;
        }
        if (targets_buffer) {
            if (!a.buffer) {
                out.push_back({ap, "missing target buffer"});
                continue;
            }
            const BufferDecl* b = buffer_of(*a.buffer);
            if (!b) {
                out.push_back({ap, "unknown buffer '" + a.buffer->str() + "'"});
                continue;
            }
            if (sys && *a.buffer != sys->buffer)
                out.push_back({ap, "write-one rule: shadow system '" + sys->name.str() +
                                       "' may only write its own buffer '" + sys->buffer.str() + "', not '" +
                                       a.buffer->str() + "'"});
            if (!sys && a.kind != ActionKind::post_query && b->owner != central_owner())
                out.push_back({ap, "buffer '" + a.buffer->str() + "' is owned by '" + b->owner.str() +
                                       "'; the central system may only post queries to it"});
            if (!sys && a.kind == ActionKind::post_query && b->owner == central_owner())
                out.push_back({ap, "queries go to a module buffer; '" + a.buffer->str() + "' belongs to central"});
        } else if (a.buffer) {
            out.push_back({ap, std::string(to_string(a.kind)) + " takes no buffer"});
        }
        const bool wants_template = a.kind == ActionKind::write_buffer || a.kind == ActionKind::post_query;
        if (wants_template && !a.tmpl)
            out.push_back({ap, a.kind == ActionKind::write_buffer ? "missing \"chunk\"" : "missing \"query\""});
        if (!wants_template && a.tmpl)
            out.push_back({ap, std::string(to_string(a.kind)) + " takes no template"});
        if (a.urgent && a.kind != ActionKind::write_buffer)
            out.push_back({ap, "only buffer writes can be urgent"});
        if (a.reward != 0.0 && a.kind != ActionKind::emit_reward)
            out.push_back({ap, "only emit-reward carries a value"});
        if (a.tmpl) {
            for (const auto& v : a.tmpl->variables())
                if (!bound.count(v))
                    out.push_back({ap, "?" + v + " is not bound by any positive condition"});
            if (a.kind == ActionKind::write_buffer) {
                auto bare = [](const Term& t) { return is_var(t) && std::get<Var>(t).name.empty(); };
                bool any = bare(a.tmpl->ctype);
                for (const auto& [_, t] : a.tmpl->slots)
                    any = any || bare(t);
                if (any)
                    out.push_back({ap, "a written chunk may not contain a bare wildcard"});
            }
        }
    }
}

} // namespace detail

// Semantic checks. Returns every violation found; empty means valid.
inline std::vector<Diagnostic> validate_model(const ModelDefinition& m) {
    std::vector<Diagnostic> out;
    auto bad = [&](std::string path, std::string msg) { out.push_back({std::move(path), std::move(msg)}); };

    if (m.name.empty())
        bad("name", "missing");
    if (m.dimension < 2)
        bad("codebook.dimension", "must be at least 2");
    if (m.cycle_length_ms <= 0)
        bad("clock.cycle_length_ms", "must be positive");
    if (m.buffers.size() > m.wm_capacity)
        bad("buffers", std::to_string(m.buffers.size()) + " buffers exceed wm_capacity " +
                           std::to_string(m.wm_capacity));

    // Names shared by writers: central, the script source, shadow systems, predictors.
    std::map<Symbol, std::string> writers{{central_owner(), "reserved"}, {script_source(), "reserved"}};
    auto claim = [&](const Symbol& name, const std::string& path) {
        if (name.empty())
            return;
        auto [it, fresh] = writers.emplace(name, path);
        if (!fresh)
            bad(path + ".name", "duplicate name '" + name.str() + "' (also " + it->second + ")");
    };

    std::set<Symbol> buffer_names;
    for (std::size_t i = 0; i < m.buffers.size(); ++i)
        if (!buffer_names.insert(m.buffers[i].name).second)
            bad(detail::at_index("", "buffers", i), "duplicate buffer '" + m.buffers[i].name.str() + "'");

    for (std::size_t i = 0; i < m.shadow_systems.size(); ++i) {
        const ShadowSystem& s = m.shadow_systems[i];
        const std::string p = detail::at_index("", "shadow_systems", i);
        claim(s.name, p);
        std::size_t owned = 0;
        for (const auto& b : m.buffers)
            owned += b.owner == s.name;
        if (owned != 1)
            bad(p, "a shadow system owns exactly one buffer; '" + s.name.str() + "' owns " + std::to_string(owned));
        const bool declared = std::any_of(m.buffers.begin(), m.buffers.end(),
                                          [&](const BufferDecl& b) { return b.name == s.buffer && b.owner == s.name; });
        if (!declared)
            bad(p + ".buffer", "'" + s.buffer.str() + "' is not a buffer owned by '" + s.name.str() + "'");
        if (s.period < 1)
            bad(p + ".period", "must be at least 1");
        if (std::set<Symbol>(s.subscriptions.begin(), s.subscriptions.end()).size() != s.subscriptions.size())
            bad(p + ".subscriptions", "duplicate tag");
    }
    for (std::size_t i = 0; i < m.predictors.size(); ++i)
        claim(m.predictors[i].name, detail::at_index("", "predictors", i));

    for (std::size_t i = 0; i < m.buffers.size(); ++i) {
        const auto& b = m.buffers[i];
        const bool shadow_owner = std::any_of(m.shadow_systems.begin(), m.shadow_systems.end(),
                                              [&](const ShadowSystem& s) { return s.name == b.owner; });
        if (b.owner != central_owner() && !shadow_owner)
            bad(detail::at_index("", "buffers", i), "owner '" + b.owner.str() + "' is neither central nor a shadow system");
    }

    std::map<Symbol, std::string> production_names;
    auto check_name = [&](const Production& p, const std::string& path) {
        auto [it, fresh] = production_names.emplace(p.name, path);
        if (!fresh)
            bad(path + ".name", "duplicate production name '" + p.name.str() + "' (also " + it->second + ")");
    };
    for (std::size_t i = 0; i < m.shadow_systems.size(); ++i) {
        const ShadowSystem& s = m.shadow_systems[i];
        for (std::size_t k = 0; k < s.productions.size(); ++k) {
            const std::string p = detail::at_index(detail::at_index("", "shadow_systems", i), "productions", k);
            check_name(s.productions[k], p);
            detail::check_production(s.productions[k], p, m, &s, out);
        }
    }
    for (std::size_t i = 0; i < m.central_productions.size(); ++i) {
        const std::string p = detail::at_index("", "central_productions", i);
        check_name(m.central_productions[i], p);
        detail::check_production(m.central_productions[i], p, m, nullptr, out);
    }

    std::set<Symbol> tags;
    for (std::size_t i = 0; i < m.predictors.size(); ++i) {
        const auto& b = m.predictors[i];
        const std::string p = detail::at_index("", "predictors", i);
        if (!tags.insert(b.tag).second)
            bad(p + ".tag", "tag '" + b.tag.str() + "' is used by another predictor");
        if (b.rate < 0)
            bad(p + ".rate", "must be non-negative");
        if (b.order < 1)
            bad(p + ".order", "must be at least 1");
        if (b.buffer && !buffer_names.count(*b.buffer))
            bad(p + ".buffer", "unknown buffer '" + b.buffer->str() + "'");
        if (b.kind == PredictorKind::external && b.command.empty() && b.endpoint.empty())
            bad(p, "an external predictor needs a command or an endpoint");
        if (b.kind != PredictorKind::external && (!b.command.empty() || !b.endpoint.empty()))
            bad(p, "command and endpoint apply to external predictors only");
        if (b.kind != PredictorKind::ngram && !b.corpus.empty())
            bad(p + ".corpus", "only n-gram predictors take a corpus");
        if (b.kind != PredictorKind::associative && !b.pairs.empty())
            bad(p + ".pairs", "only associative predictors take pairs");
    }

    const auto& c = m.middle_memory;
    if (c.decay <= 0.0)
        bad("middle_memory.decay", "must be positive");
    if (c.spreading < 0.0)
        bad("middle_memory.spreading", "must be non-negative");
    if (c.forgetting_threshold > c.retrieval_threshold)
        bad("middle_memory.forgetting_threshold", "must not exceed retrieval_threshold");
    if (c.noise < 0.0)
        bad("middle_memory.noise", "must be non-negative");
    if (c.cleanup_threshold < -1.0 || c.cleanup_threshold > 1.0)
        bad("middle_memory.cleanup_threshold", "must lie in [-1, 1]");
    if (c.wm_weight < 0.0)
        bad("middle_memory.wm_weight", "must be non-negative");
    if (c.context_symbols < 0)
        bad("middle_memory.context_symbols", "must be non-negative");

    if (!(m.learning.alpha > 0.0 && m.learning.alpha <= 1.0))
        bad("learning.alpha", "must lie in (0, 1]");
    if (m.learning.time_cost < 0.0)
        bad("learning.time_cost", "must be non-negative");
    if (m.learning.ttl_ms <= 0)
        bad("learning.ttl_ms", "must be positive");

    for (std::size_t i = 0; i < m.rewards.size(); ++i)
        if (m.rewards[i].cycle < 0)
            bad(detail::at_index("", "rewards", i) + ".cycle", "must be non-negative");

    std::set<Symbol> seeded;
    for (std::size_t i = 0; i < m.initial_wm.size(); ++i) {
        const auto& w = m.initial_wm[i];
        const std::string p = detail::at_index("initial", "wm", i);
        if (!buffer_names.count(w.buffer))
            bad(p + ".buffer", "unknown buffer '" + w.buffer.str() + "'");
        else if (!seeded.insert(w.buffer).second)
            bad(p + ".buffer", "buffer '" + w.buffer.str() + "' is seeded twice");
    }
    for (std::size_t i = 0; i < m.initial_mm.size(); ++i) {
        const auto& e = m.initial_mm[i];
        const std::string p = detail::at_index("initial", "mm", i);
        if (e.presentations_ms.empty())
            bad(p + ".presentations_ms", "needs at least one presentation");
        for (Millis t : e.presentations_ms)
            if (t >= 0) {
                bad(p + ".presentations_ms", "presentations must precede the run (negative milliseconds)");
                break;
            }
        for (std::size_t l : e.links)
            if (l >= m.initial_mm.size())
                bad(p + ".links", "no entry " + std::to_string(l));
    }
    for (std::size_t i = 0; i < m.scripted_deposits.size(); ++i)
        if (m.scripted_deposits[i].cycle < 0)
            bad(detail::at_index("", "scripted_deposits", i) + ".cycle", "must be non-negative");
    return out;
}

inline ModelDefinition load_model_json(const json& j) {
    ModelDefinition m = parse_model(j);
    if (auto ds = validate_model(m); !ds.empty())
        throw model_invalid(std::move(ds));
    return m;
}

inline ModelDefinition load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw error("cannot open model file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw model_invalid({{"", std::string("not valid JSON: ") + e.what()}});
    }
    return load_model_json(j);
}

namespace detail {

inline json symbols_json(const std::vector<Symbol>& ss) {
    json a = json::array();
    for (const auto& s : ss)
        a.push_back(s.str());
    return a;
}

inline json production_json(const Production& p) {
    json conds = json::array();
    for (const auto& c : p.conditions) {
        json e = json::object();
        if (c.buffer)
            e["buffer"] = c.buffer->str();
        else
            e["mm"] = symbols_json(c.mm_tags);
        e["pattern"] = query_to_json(c.pattern);
        e["negated"] = c.negated;
        conds.push_back(std::move(e));
    }
    json acts = json::array();
    for (const auto& a : p.actions) {
        json e = json{{"kind", to_string(a.kind)}};
        if (a.buffer)
            e["buffer"] = a.buffer->str();
        if (a.tmpl)
            e[a.kind == ActionKind::post_query ? "query" : "chunk"] = query_to_json(*a.tmpl);
        e["urgent"] = a.urgent;
        e["value"] = a.reward;
        acts.push_back(std::move(e));
    }
    return json{{"name", p.name.str()}, {"utility", p.utility}, {"permanent", p.permanent},
                {"conditions", std::move(conds)}, {"actions", std::move(acts)}};
}

} // namespace detail

// Canonical form: fixed key order, every default spelled out.
inline json write_model(const ModelDefinition& m) {
    json buffers = json::array();
    for (const auto& b : m.buffers)
        buffers.push_back(json{{"name", b.name.str()}, {"owner", b.owner.str()}});

    json shadows = json::array();
    for (const auto& s : m.shadow_systems) {
        json ps = json::array();
        for (const auto& p : s.productions)
            ps.push_back(detail::production_json(p));
        shadows.push_back(json{{"name", s.name.str()},
                               {"buffer", s.buffer.str()},
                               {"subscriptions", detail::symbols_json(s.subscriptions)},
                               {"period", s.period},
                               {"form_productions", s.form_productions},
                               {"productions", std::move(ps)}});
    }

    json central = json::array();
    for (const auto& p : m.central_productions)
        central.push_back(detail::production_json(p));

    json predictors = json::array();
    for (const auto& b : m.predictors) {
        json corpus = json::array();
        for (const auto& seq : b.corpus) {
            std::string line;
            for (const auto& w : seq)
                line += (line.empty() ? "" : " ") + w.str();
            corpus.push_back(line);
        }
        json pairs = json::array();
        for (const auto& p : b.pairs)
            pairs.push_back(json{{"cue", p.cue.str()}, {"associate", p.associate.str()}, {"count", p.count}});
        json e{{"name", b.name.str()}, {"kind", to_string(b.kind)}, {"tag", b.tag.str()},
               {"rate", b.rate},       {"seed", b.seed},             {"order", b.order},
               {"corpus", corpus},     {"pairs", pairs}};
        if (b.chunk_type)
            e["chunk_type"] = b.chunk_type->str();
        if (b.buffer)
            e["buffer"] = b.buffer->str();
        e["command"] = b.command;
        e["endpoint"] = b.endpoint;
        predictors.push_back(std::move(e));
    }

    const auto& c = m.middle_memory;
    json mm{{"decay", c.decay},
            {"spreading", c.spreading},
            {"retrieval_threshold", c.retrieval_threshold},
            {"forgetting_threshold", c.forgetting_threshold},
            {"noise", c.noise},
            {"formation_threshold", c.formation_threshold},
            {"cleanup_threshold", c.cleanup_threshold},
            {"wm_weight", c.wm_weight},
            {"context_symbols", c.context_symbols}};

    json rewards = json::array();
    for (const auto& r : m.rewards)
        rewards.push_back(json{{"cycle", r.cycle}, {"value", r.value}});

    json init_wm = json::array();
    for (const auto& w : m.initial_wm)
        init_wm.push_back(json{{"buffer", w.buffer.str()}, {"chunk", chunk_to_json(w.chunk)}});
    json init_mm = json::array();
    for (const auto& e : m.initial_mm)
        init_mm.push_back(json{{"tag", e.tag.str()},
                               {"chunk", chunk_to_json(e.chunk)},
                               {"presentations_ms", e.presentations_ms},
                               {"links", e.links}});

    json scripted = json::array();
    for (const auto& d : m.scripted_deposits)
        scripted.push_back(json{{"cycle", d.cycle}, {"tag", d.tag.str()}, {"chunk", chunk_to_json(d.chunk)}});

    return json{{"name", m.name},
                {"codebook", {{"dimension", m.dimension}, {"seed", m.codebook_seed}}},
                {"clock", {{"cycle_length_ms", m.cycle_length_ms}}},
                {"wm_capacity", m.wm_capacity},
                {"buffers", std::move(buffers)},
                {"shadow_systems", std::move(shadows)},
                {"central_productions", std::move(central)},
                {"predictors", std::move(predictors)},
                {"middle_memory", std::move(mm)},
                {"learning",
                 {{"alpha", m.learning.alpha}, {"time_cost", m.learning.time_cost}, {"ttl_ms", m.learning.ttl_ms}}},
                {"rewards", std::move(rewards)},
                {"initial", {{"wm", std::move(init_wm)}, {"mm", std::move(init_mm)}}},
                {"scripted_deposits", std::move(scripted)}};
}

} // namespace mmarch
