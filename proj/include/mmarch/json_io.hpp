#pragma once

// JSON forms shared by model files, the trace and the predictor wire protocol.
//   chunk:   {"isa":"dog","slots":{"name":"Fido","breed":"labrador"}}
//   pattern: same shape; "?" and "?x" are wildcards / variable references

#include <cmath>
#include <string>

#include "json.hpp"
#include "mmarch/chunk.hpp"
#include "mmarch/holo.hpp"

namespace mmarch {

using json = nlohmann::ordered_json;

inline json chunk_to_json(const Chunk& c) {
    json slots = json::object();
    for (const auto& [k, v] : c.slots)
        slots[k.str()] = v.str();
    return json{{"isa", c.ctype.str()}, {"slots", std::move(slots)}};
}

inline json query_to_json(const Query& q) {
    json slots = json::object();
    for (const auto& [k, t] : q.slots)
        slots[k.str()] = term_text(t);
    return json{{"isa", term_text(q.ctype)}, {"slots", std::move(slots)}};
}

namespace detail {

inline const json& require(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key))
        throw invalid_argument(std::string("missing \"") + key + "\"");
    return j.at(key);
}

inline std::string text(const json& j, const char* what) {
    if (!j.is_string())
        throw invalid_argument(std::string(what) + " must be a string");
    return j.get<std::string>();
}

} // namespace detail

inline Query query_from_json(const json& j) {
    Query q{parse_term(detail::text(detail::require(j, "isa"), "isa")), {}};
    if (j.contains("slots")) {
        const json& slots = j.at("slots");
        if (!slots.is_object())
            throw invalid_argument("slots must be an object");
        for (const auto& [k, v] : slots.items()) {
            Symbol name{k};
            if (name.str() == isa_slot)
                throw invalid_argument("'isa' is reserved and cannot be a slot name");
            q.slots.emplace_back(std::move(name), parse_term(detail::text(v, "slot value")));
        }
    }
    return q;
}

// Rejects wildcards: chunks are ground.
inline Chunk chunk_from_json(const json& j) {
    Query q = query_from_json(j);
    if (q.wildcard_count() != 0)
        throw invalid_argument("chunk contains a wildcard");
    return instantiate(q, {});
}

inline json vector_to_json(const HoloVector& v) { return json(v.values); }

inline HoloVector vector_from_json(const json& j) {
    if (!j.is_array())
        throw invalid_argument("vector must be an array of numbers");
    HoloVector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number())
            throw invalid_argument("vector must be an array of numbers");
        v.values[i] = j[i].get<double>();
        if (!std::isfinite(v.values[i]))
            throw invalid_argument("vector entries must be finite");
    }
    return v;
}

} // namespace mmarch
