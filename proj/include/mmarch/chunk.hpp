#pragma once

// Symbolic chunks, query patterns and binary pattern matching.
//
// A chunk is a typed, ordered bundle of slot:value pairs such as
//   {isa:dog name:Fido breed:labrador}
// A query has the same shape but any position may hold a wildcard. The bare
// wildcard `?` binds under its slot name; a named wildcard `?x` binds under
// `x` and must bind consistently wherever it appears.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "mmarch/error.hpp"

namespace mmarch {

inline constexpr std::string_view wildcard_token = "?";
inline constexpr std::string_view isa_slot = "isa";

class Symbol {
public:
    Symbol() = default;

    explicit Symbol(std::string name) : name_(std::move(name)) {
        if (!valid(name_))
            throw invalid_argument("invalid symbol '" + name_ + "'");
    }

    // Non-empty, no whitespace, no ':', and not starting with the wildcard mark.
    static bool valid(std::string_view s) {
        if (s.empty() || s.front() == '?')
            return false;
        return std::none_of(s.begin(), s.end(), [](char c) {
            return c == ':' || c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
                   c == '\f';
        });
    }

    const std::string& str() const { return name_; }
    bool empty() const { return name_.empty(); }

    friend bool operator==(const Symbol&, const Symbol&) = default;
    friend auto operator<=>(const Symbol&, const Symbol&) = default;

private:
    std::string name_;
};

inline Symbol operator""_sym(const char* s, std::size_t n) { return Symbol(std::string(s, n)); }

using ChunkId = std::uint64_t;

struct Chunk {
    Symbol ctype;
    std::vector<std::pair<Symbol, Symbol>> slots;
    ChunkId id = 0;

    const Symbol* get(const Symbol& slot) const {
        for (const auto& [name, value] : slots)
            if (name == slot)
                return &value;
        return nullptr;
    }

    // ctype followed by slot values in declaration order.
    std::vector<Symbol> symbols() const {
        std::vector<Symbol> out;
        out.reserve(slots.size() + 1);
        out.push_back(ctype);
        for (const auto& [_, value] : slots)
            out.push_back(value);
        return out;
    }

    bool operator==(const Chunk&) const = default;
};

// Same type and the same slot:value set; ids and slot order are ignored.
inline bool same_content(const Chunk& a, const Chunk& b) {
    if (a.ctype != b.ctype || a.slots.size() != b.slots.size())
        return false;
    return std::all_of(a.slots.begin(), a.slots.end(), [&](const auto& kv) {
        const Symbol* v = b.get(kv.first);
        return v && *v == kv.second;
    });
}

// Hands out chunk ids; one per run so ids are reproducible.
class ChunkIds {
public:
    explicit ChunkIds(ChunkId first = 1) : next_(first) {}
    ChunkId next() { return next_++; }
    ChunkId peek() const { return next_; }

private:
    ChunkId next_;
};

inline Chunk make_chunk(ChunkIds& ids, Symbol ctype,
                        std::vector<std::pair<Symbol, Symbol>> slots) {
    if (ctype.empty())
        throw invalid_argument("chunk type must be a symbol");
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].first.empty())
            throw invalid_argument("empty slot name");
        if (slots[i].second.empty())
            throw invalid_argument("slot '" + slots[i].first.str() + "' has no value");
        for (std::size_t j = 0; j < i; ++j)
            if (slots[j].first == slots[i].first)
                throw invalid_argument("duplicate slot name '" + slots[i].first.str() + "'");
    }
    return Chunk{std::move(ctype), std::move(slots), ids.next()};
}

// Convenience overload for text pairs; a value of "?" is rejected.
inline Chunk make_chunk(ChunkIds& ids, std::string_view ctype,
                        std::initializer_list<std::pair<std::string_view, std::string_view>> slots) {
    std::vector<std::pair<Symbol, Symbol>> out;
    for (const auto& [k, v] : slots) {
        if (v == wildcard_token)
            throw invalid_argument("slot '" + std::string(k) + "' holds a wildcard");
        out.emplace_back(Symbol(std::string(k)), Symbol(std::string(v)));
    }
    return make_chunk(ids, Symbol(std::string(ctype)), std::move(out));
}

// Wildcard position. An empty name is the anonymous `?`.
struct Var {
    std::string name;
    bool operator==(const Var&) const = default;
};

using Term = std::variant<Symbol, Var>;

inline bool is_var(const Term& t) { return std::holds_alternative<Var>(t); }

inline Term parse_term(std::string_view text) {
    if (!text.empty() && text.front() == '?') {
        std::string_view name = text.substr(1);
        if (!name.empty() && !Symbol::valid(name))
            throw invalid_argument("invalid variable '" + std::string(text) + "'");
        return Var{std::string(name)};
    }
    return Symbol(std::string(text));
}

inline std::string term_text(const Term& t) {
    if (const auto* s = std::get_if<Symbol>(&t))
        return s->str();
    return "?" + std::get<Var>(t).name;
}

struct Query {
    Term ctype = Var{};
    std::vector<std::pair<Symbol, Term>> slots;

    std::size_t wildcard_count() const {
        return static_cast<std::size_t>(is_var(ctype)) +
               static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(),
                                                      [](const auto& kv) { return is_var(kv.second); }));
    }

    // Named variables in order of first appearance.
    std::vector<std::string> variables() const {
        std::vector<std::string> out;
        auto add = [&](const Term& t) {
            if (const auto* v = std::get_if<Var>(&t); v && !v->name.empty() &&
                                                      std::find(out.begin(), out.end(), v->name) == out.end())
                out.push_back(v->name);
        };
        add(ctype);
        for (const auto& [_, t] : slots)
            add(t);
        return out;
    }

    bool operator==(const Query&) const = default;
};

// Exact pattern for a chunk: every position constrained.
inline Query exact_query(const Chunk& c) {
    Query q{c.ctype, {}};
    for (const auto& [k, v] : c.slots)
        q.slots.emplace_back(k, v);
    return q;
}

inline Query make_query(std::string_view ctype,
                        std::initializer_list<std::pair<std::string_view, std::string_view>> slots) {
    Query q{parse_term(ctype), {}};
    for (const auto& [k, v] : slots) {
        Symbol name{std::string(k)};
        for (const auto& existing : q.slots)
            if (existing.first == name)
                throw invalid_argument("duplicate slot name '" + name.str() + "'");
        q.slots.emplace_back(std::move(name), parse_term(v));
    }
    return q;
}

// Keyed by variable name, or by slot name ("isa" for the type) for bare wildcards.
using Bindings = std::map<std::string, Symbol>;

namespace detail {

inline bool bind_term(const Term& t, const std::string& position, const Symbol& value, Bindings& out) {
    if (const auto* s = std::get_if<Symbol>(&t))
        return *s == value;
    const auto& var = std::get<Var>(t);
    const std::string& key = var.name.empty() ? position : var.name;
    auto [it, inserted] = out.emplace(key, value);
    // Anonymous wildcards never constrain each other.
    return inserted || var.name.empty() || it->second == value;
}

} // namespace detail

// Bindings iff every constrained position of `q` equals the chunk's and every
// slot named in `q` exists in `c`. Extra slots in `c` are ignored.
inline std::optional<Bindings> match_query(const Query& q, const Chunk& c) {
    Bindings out;
    if (!detail::bind_term(q.ctype, std::string(isa_slot), c.ctype, out))
        return std::nullopt;
    for (const auto& [slot, term] : q.slots) {
        const Symbol* value = c.get(slot);
        if (!value || !detail::bind_term(term, slot.str(), *value, out))
            return std::nullopt;
    }
    return out;
}

// Like match_query, but only named variables bind; bare wildcards match
// anything and are not reported. This is the form productions use.
inline std::optional<Bindings> match_pattern(const Query& q, const Chunk& c) {
    Bindings out;
    auto test = [&](const Term& t, const Symbol& value) {
        if (const auto* s = std::get_if<Symbol>(&t))
            return *s == value;
        const auto& var = std::get<Var>(t);
        if (var.name.empty())
            return true;
        auto [it, inserted] = out.emplace(var.name, value);
        return inserted || it->second == value;
    };
    if (!test(q.ctype, c.ctype))
        return std::nullopt;
    for (const auto& [slot, term] : q.slots) {
        const Symbol* value = c.get(slot);
        if (!value || !test(term, *value))
            return std::nullopt;
    }
    return out;
}

// Replace named variables that are already bound; other wildcards stay.
inline Query substitute(const Query& q, const Bindings& b) {
    auto sub = [&](const Term& t) -> Term {
        if (const auto* v = std::get_if<Var>(&t); v && !v->name.empty()) {
            if (auto it = b.find(v->name); it != b.end())
                return it->second;
        }
        return t;
    };
    Query out{sub(q.ctype), {}};
    out.slots.reserve(q.slots.size());
    for (const auto& [k, t] : q.slots)
        out.slots.emplace_back(k, sub(t));
    return out;
}

// Fill a chunk template. Every variable must be named and bound; the returned
// chunk has id 0 until it is committed somewhere.
inline Chunk instantiate(const Query& tmpl, const Bindings& b) {
    auto resolve = [&](const Term& t) -> Symbol {
        if (const auto* s = std::get_if<Symbol>(&t))
            return *s;
        const auto& v = std::get<Var>(t);
        if (v.name.empty())
            throw model_error("chunk template contains a bare wildcard");
        auto it = b.find(v.name);
        if (it == b.end())
            throw model_error("unbound reference ?" + v.name);
        return it->second;
    };
    Chunk c{resolve(tmpl.ctype), {}, 0};
    c.slots.reserve(tmpl.slots.size());
    for (const auto& [k, t] : tmpl.slots)
        c.slots.emplace_back(k, resolve(t));
    return c;
}

// Complete a query with the bindings produced by matching it.
inline Chunk complete_query(const Query& q, const Bindings& b) {
    auto resolve = [&](const Term& t, const std::string& position) -> Symbol {
        if (const auto* s = std::get_if<Symbol>(&t))
            return *s;
        const auto& v = std::get<Var>(t);
        return b.at(v.name.empty() ? position : v.name);
    };
    Chunk c{resolve(q.ctype, std::string(isa_slot)), {}, 0};
    for (const auto& [k, t] : q.slots)
        c.slots.emplace_back(k, resolve(t, k.str()));
    return c;
}

inline std::string to_string(const Chunk& c) {
    std::string out = "{isa:" + c.ctype.str();
    for (const auto& [k, v] : c.slots)
        out += " " + k.str() + ":" + v.str();
    return out + "}";
}

inline std::string to_string(const Query& q) {
    std::string out = "{isa:" + term_text(q.ctype);
    for (const auto& [k, t] : q.slots)
        out += " " + k.str() + ":" + term_text(t);
    return out + "}";
}

} // namespace mmarch
