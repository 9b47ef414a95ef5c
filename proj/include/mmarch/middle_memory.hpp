#pragma once

// Middle memory: an activation-ranked store of tagged predictions and
// propositional chunks sitting between the predictors and the production
// systems.
//
// Activation of an entry at time t:
//   A = B + S + noise
//   B = ln sum_j (t - t_j)^-d                 (recency and frequency)
//   S = sum over chunk-holding WM buffers that share a symbol with the entry,
//       or hold the content of a graph neighbour, of W / n_nonempty
// Entries below the forgetting threshold are dropped by a sweep.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "mmarch/chunk.hpp"
#include "mmarch/holo.hpp"
#include "mmarch/working_memory.hpp"

namespace mmarch {

using EntryId = std::uint64_t;

struct MMParams {
    double decay = 0.5;
    double spreading = 1.0;
    double retrieval_threshold = -1.0;
    double forgetting_threshold = -2.5;
    double noise = 0.0;          // logistic scale s; 0 disables noise
    std::uint64_t noise_seed = 0;

    bool operator==(const MMParams&) const = default;
};

struct MMEntry {
    EntryId id = 0;
    Symbol tag;
    std::optional<Chunk> chunk;       // symbolic payload or decoded vector
    std::optional<HoloVector> vector; // raw vector payload
    std::vector<Millis> presentations;
    std::set<EntryId> links;
    double last_activation = 0.0;
};

struct Deposit {
    EntryId id = 0;
    bool created = false;
};

struct Forgotten {
    EntryId id = 0;
    Symbol tag;
    double activation = 0.0;
};

class MiddleMemory {
public:
    explicit MiddleMemory(MMParams params = {}) : params_(params) {
        if (params_.forgetting_threshold > params_.retrieval_threshold)
            throw invalid_argument("forgetting threshold must not exceed retrieval threshold");
    }

    const MMParams& params() const { return params_; }
    const std::map<EntryId, MMEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    // Latest presentation time on record (any entry, including erased ones).
    Millis latest() const { return latest_; }

    const MMEntry* find(EntryId id) const {
        auto it = entries_.find(id);
        return it == entries_.end() ? nullptr : &it->second;
    }

    const MMEntry& at(EntryId id) const {
        if (const auto* e = find(id))
            return *e;
        throw invalid_argument("unknown middle-memory entry " + std::to_string(id));
    }

    // Identity is (payload content, tag): a repeat adds a presentation.
    Deposit deposit(std::optional<Chunk> chunk, std::optional<HoloVector> vector, const Symbol& tag,
                    Millis now) {
        if (!chunk && !vector)
            throw invalid_argument("deposit needs a chunk or a vector");
        if (now < latest_)
            throw temporal_order_error("deposit at " + std::to_string(now) +
                                       " ms precedes an existing presentation at " +
                                       std::to_string(latest_) + " ms");
        for (auto& [id, e] : entries_) {
            if (e.tag != tag || e.chunk.has_value() != chunk.has_value() ||
                e.vector.has_value() != vector.has_value())
                continue;
            if (chunk && !same_content(*e.chunk, *chunk))
                continue;
            if (vector && *e.vector != *vector)
                continue;
            e.presentations.push_back(now);
            latest_ = now;
            return {id, false};
        }
        return {insert(std::move(chunk), std::move(vector), tag, {now}), true};
    }

    // Seeds an entry with a full presentation history (model initialisation).
    EntryId insert(std::optional<Chunk> chunk, std::optional<HoloVector> vector, const Symbol& tag,
                   std::vector<Millis> presentations) {
        if (presentations.empty())
            throw invalid_argument("an entry needs at least one presentation");
        std::sort(presentations.begin(), presentations.end());
        if (chunk)
            chunk->id = 0;
        const EntryId id = next_id_++;
        latest_ = std::max(latest_, presentations.back());
        entries_.emplace(id, MMEntry{id, tag, std::move(chunk), std::move(vector),
                                     std::move(presentations), {}, 0.0});
        return id;
    }

    void link(EntryId a, EntryId b) {
        auto ia = entries_.find(a), ib = entries_.find(b);
        if (ia == entries_.end() || ib == entries_.end())
            throw invalid_argument("link between unknown entries " + std::to_string(a) + " and " +
                                   std::to_string(b));
        if (a == b)
            return;
        ia->second.links.insert(b);
        ib->second.links.insert(a);
    }

    void erase(EntryId id) {
        auto it = entries_.find(id);
        if (it == entries_.end())
            return;
        for (EntryId n : it->second.links)
            if (auto jt = entries_.find(n); jt != entries_.end())
                jt->second.links.erase(id);
        entries_.erase(it);
        std::erase_if(packed_, [id](const auto& kv) { return kv.first.first == id; });
    }

    void set_cached_activation(EntryId id, double a) { entries_.at(id).last_activation = a; }

    // Packed form of an entry, computed once per codebook.
    const HoloVector& vector_of(const MMEntry& e, const Codebook& book) const {
        auto key = std::make_pair(e.id, &book);
        auto it = packed_.find(key);
        if (it != packed_.end())
            return it->second;
        HoloVector v = e.vector ? e.vector->normalized() : pack(*e.chunk, book);
        return packed_.emplace(key, std::move(v)).first->second;
    }

private:
    MMParams params_;
    std::map<EntryId, MMEntry> entries_;
    EntryId next_id_ = 1;
    Millis latest_ = std::numeric_limits<Millis>::min();
    mutable std::map<std::pair<EntryId, const Codebook*>, HoloVector> packed_;
};

inline double seconds(Millis ms) { return static_cast<double>(ms) / 1000.0; }

inline double base_level(std::span<const Millis> presentations, Millis now, double decay) {
    if (presentations.empty())
        throw invalid_argument("no presentations");
    if (now <= presentations.back())
        throw temporal_order_error("activation requested at " + std::to_string(now) +
                                   " ms, not after the latest presentation at " +
                                   std::to_string(presentations.back()) + " ms");
    double sum = 0.0;
    for (Millis t : presentations)
        sum += std::pow(seconds(now - t), -decay);
    return std::log(sum);
}

inline double spreading(const MiddleMemory& mm, const MMEntry& e, const WorkingMemory& wm) {
    const std::size_t n = wm.nonempty_chunk_buffers();
    if (n == 0 || mm.params().spreading == 0.0)
        return 0.0;
    std::vector<Symbol> own;
    if (e.chunk)
        own = e.chunk->symbols();
    double s = 0.0;
    for (const auto& b : wm.buffers()) {
        if (!b.content)
            continue;
        bool related = false;
        for (const auto& sym : b.content->symbols())
            if (std::find(own.begin(), own.end(), sym) != own.end()) {
                related = true;
                break;
            }
        if (!related)
            for (EntryId nb : e.links) {
                const MMEntry* other = mm.find(nb);
                if (other && other->chunk && same_content(*other->chunk, *b.content)) {
                    related = true;
                    break;
                }
            }
        if (related)
            s += mm.params().spreading / static_cast<double>(n);
    }
    return s;
}

// Logistic noise keyed on (seed, time, entry) so it does not depend on the
// order in which activations are requested.
inline double activation_noise(const MMParams& p, EntryId id, Millis now) {
    if (p.noise == 0.0)
        return 0.0;
    std::uint64_t h = detail::splitmix64(p.noise_seed ^ detail::splitmix64(
                                                            static_cast<std::uint64_t>(now) ^
                                                            detail::splitmix64(id)));
    double u = detail::unit_uniform(h);
    u = std::clamp(u, 1e-12, 1.0 - 1e-12);
    return p.noise * std::log(u / (1.0 - u));
}

inline double activation(const MiddleMemory& mm, const MMEntry& e, const WorkingMemory& wm, Millis now) {
    return base_level(e.presentations, now, mm.params().decay) + spreading(mm, e, wm) +
           activation_noise(mm.params(), e.id, now);
}

using ActivationTable = std::map<EntryId, double>;

inline ActivationTable compute_activations(const MiddleMemory& mm, const WorkingMemory& wm, Millis now) {
    ActivationTable t;
    for (const auto& [id, e] : mm.entries())
        t.emplace(id, activation(mm, e, wm, now));
    return t;
}

struct Ranked {
    EntryId id = 0;
    double activation = 0.0;
    bool operator==(const Ranked&) const = default;
};

// Entries at or above the retrieval threshold that match `pattern` (against the
// symbolic chunk; vector-only entries never match a pattern) and carry one of
// `tags`; sorted by activation desc, id asc; at most k.
inline std::vector<Ranked> mm_retrieve(const MiddleMemory& mm, const ActivationTable& acts,
                                       const Query* pattern, std::span<const Symbol> tags,
                                       std::size_t k) {
    if (k == 0)
        throw invalid_argument("k must be at least 1");
    std::vector<Ranked> out;
    for (const auto& [id, e] : mm.entries()) {
        const double a = acts.at(id);
        if (a < mm.params().retrieval_threshold)
            continue;
        if (!tags.empty() && std::find(tags.begin(), tags.end(), e.tag) == tags.end())
            continue;
        if (pattern && (!e.chunk || !match_query(*pattern, *e.chunk)))
            continue;
        out.push_back({id, a});
    }
    std::sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
        if (a.activation != b.activation)
            return a.activation > b.activation;
        return a.id < b.id;
    });
    if (out.size() > k)
        out.resize(k);
    return out;
}

inline std::vector<Ranked> mm_retrieve(const MiddleMemory& mm, const WorkingMemory& wm, Millis now,
                                       const Query* pattern, std::span<const Symbol> tags,
                                       std::size_t k) {
    return mm_retrieve(mm, compute_activations(mm, wm, now), pattern, tags, k);
}

// Refresh cached activations and drop everything below the forgetting threshold.
inline std::vector<Forgotten> mm_sweep(MiddleMemory& mm, const WorkingMemory& wm, Millis now) {
    std::vector<Forgotten> gone;
    const ActivationTable acts = compute_activations(mm, wm, now);
    for (const auto& [id, a] : acts) {
        mm.set_cached_activation(id, a);
        if (a < mm.params().forgetting_threshold)
            gone.push_back({id, mm.at(id).tag, a});
    }
    for (const auto& f : gone)
        mm.erase(f.id);
    return gone;
}

struct ContextVector {
    HoloVector vector;
    bool zero = true;
};

// Unit-norm blend of every chunk in WM (weight `wm_weight` each) and every
// retrievable MM entry, the latter weighted by a softmax over activations.
inline ContextVector context_vector(const WorkingMemory& wm, const MiddleMemory& mm, const Codebook& book,
                                    Millis now, double wm_weight = 1.0) {
    HoloVector sum(book.dimension());
    for (const auto& b : wm.buffers())
        if (b.content)
            sum.add_scaled(pack(*b.content, book), wm_weight);

    std::vector<std::pair<const MMEntry*, double>> live;
    for (const auto& [id, e] : mm.entries()) {
        double a = activation(mm, e, wm, now);
        if (a >= mm.params().retrieval_threshold)
            live.emplace_back(&e, a);
    }
    if (!live.empty()) {
        double top = live.front().second;
        for (const auto& [_, a] : live)
            top = std::max(top, a);
        double z = 0.0;
        for (auto& [_, a] : live) {
            a = std::exp(a - top);
            z += a;
        }
        for (const auto& [e, w] : live)
            sum.add_scaled(mm.vector_of(*e, book), w / z);
    }
    if (sum.norm() == 0.0)
        return {std::move(sum), true};
    return {sum.normalized(), false};
}

} // namespace mmarch
