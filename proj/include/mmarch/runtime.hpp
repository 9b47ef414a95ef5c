#pragma once

// The cycle loop. Each cycle runs a fixed sequence of phases:
//   1 drain the ingestion queue (mm: deposits; pipeline: straight into buffers)
//   2 forgetting sweep
//   3 shadow systems (mm mode only)
//   4 central match / resolve / fire
//   5 mark consumed shadow deposits
//   6 rewards, utility learning, shadow credit
//   7 production formation and pruning
//   8 context vector and broadcast to predictors
//   9 clock advance
// Everything observable goes to the trace.

#include <iomanip>
#include <memory>
#include <sstream>
#include <tuple>

#include "mmarch/metrics.hpp"
#include "mmarch/model.hpp"
#include "mmarch/trace.hpp"

namespace mmarch {

enum class Mode { mm, pipeline };

inline const char* to_string(Mode m) { return m == Mode::mm ? "mm" : "pipeline"; }

inline std::optional<Mode> parse_mode(std::string_view s) {
    if (s == "mm")
        return Mode::mm;
    if (s == "pipeline")
        return Mode::pipeline;
    return std::nullopt;
}

struct RunOptions {
    Mode mode = Mode::mm;
    std::uint64_t seed = 0;
    // Order in which shadow systems are stepped; commits always happen in name
    // order. Empty means name order.
    std::vector<Symbol> shadow_order;
};

class Clock {
public:
    explicit Clock(Millis cycle_length = 50) : length_(cycle_length) {
        if (cycle_length <= 0)
            throw invalid_argument("cycle length must be positive");
    }
    std::int64_t cycle() const { return cycle_; }
    Millis cycle_length() const { return length_; }
    Millis now() const { return cycle_ * length_; }
    void advance() { ++cycle_; }

private:
    Millis length_;
    std::int64_t cycle_ = 0;
};

namespace detail {

inline json bindings_json(const Bindings& b) {
    json j = json::object();
    for (const auto& [k, v] : b)
        j[k] = v.str();
    return j;
}

inline json ids_json(const std::vector<EntryId>& ids) {
    json j = json::array();
    for (auto id : ids)
        j.push_back(id);
    return j;
}

inline void collect_slots(const Query& q, std::set<Symbol>& out) {
    for (const auto& [k, _] : q.slots)
        out.insert(k);
}

inline void collect_slots(const Chunk& c, std::set<Symbol>& out) {
    for (const auto& [k, _] : c.slots)
        out.insert(k);
}

inline void collect_slots(const Production& p, std::set<Symbol>& out) {
    for (const auto& c : p.conditions)
        collect_slots(c.pattern, out);
    for (const auto& a : p.actions)
        if (a.tmpl)
            collect_slots(*a.tmpl, out);
}

} // namespace detail

class Runtime {
public:
    Runtime(ModelDefinition model, RunOptions options = {})
        : model_(validated(std::move(model))), options_(std::move(options)), clock_(model_.cycle_length_ms),
          book_(model_.dimension, model_.codebook_seed), wm_(model_.wm_capacity), mm_(mm_params()) {
        for (const auto& b : model_.buffers)
            wm_.add_buffer(b.name, b.owner);
        for (const auto& w : model_.initial_wm) {
            Chunk c = w.chunk;
            c.id = ids_.next();
            wm_.at(w.buffer).content = std::move(c);
        }
        std::vector<EntryId> seeded;
        for (const auto& e : model_.initial_mm)
            seeded.push_back(mm_.insert(e.chunk, std::nullopt, e.tag, e.presentations_ms));
        for (std::size_t i = 0; i < model_.initial_mm.size(); ++i)
            for (std::size_t l : model_.initial_mm[i].links)
                mm_.link(seeded[i], seeded[l]);

        shadows_ = model_.shadow_systems;
        std::sort(shadows_.begin(), shadows_.end(),
                  [](const ShadowSystem& a, const ShadowSystem& b) { return a.name < b.name; });
        step_order_.resize(shadows_.size());
        for (std::size_t i = 0; i < shadows_.size(); ++i)
            step_order_[i] = i;
        if (!options_.shadow_order.empty()) {
            if (options_.shadow_order.size() != shadows_.size())
                throw invalid_argument("shadow order must name every shadow system once");
            for (std::size_t i = 0; i < shadows_.size(); ++i) {
                auto it = std::find_if(shadows_.begin(), shadows_.end(),
                                       [&](const ShadowSystem& s) { return s.name == options_.shadow_order[i]; });
                if (it == shadows_.end())
                    throw invalid_argument("unknown shadow system '" + options_.shadow_order[i].str() + "'");
                step_order_[i] = static_cast<std::size_t>(it - shadows_.begin());
            }
            if (std::set<std::size_t>(step_order_.begin(), step_order_.end()).size() != shadows_.size())
                throw invalid_argument("shadow order must name every shadow system once");
        }

        central_ = model_.central_productions;
        learner_.alpha = model_.learning.alpha;
        learner_.time_cost = model_.learning.time_cost;

        auto predictors = model_.predictors;
        std::sort(predictors.begin(), predictors.end(),
                  [](const PredictorBinding& a, const PredictorBinding& b) { return a.name < b.name; });
        for (auto& p : predictors) {
            if (p.kind == PredictorKind::external)
                predictors_.push_back({p, nullptr, std::make_unique<ExternalPredictor>(p, queue_)});
            else
                predictors_.push_back({p, std::make_unique<ReferencePredictor>(p), nullptr});
        }

        std::set<Symbol> roles;
        for (const auto& s : shadows_)
            for (const auto& p : s.productions)
                detail::collect_slots(p, roles);
        for (const auto& p : central_)
            detail::collect_slots(p, roles);
        for (const auto& w : model_.initial_wm)
            detail::collect_slots(w.chunk, roles);
        for (const auto& e : model_.initial_mm)
            detail::collect_slots(e.chunk, roles);
        for (const auto& d : model_.scripted_deposits)
            detail::collect_slots(d.chunk, roles);
        for (const auto& p : predictors_) {
            if (p.binding.kind == PredictorKind::ngram)
                roles.insert({Symbol("after"), Symbol("value")});
            else if (p.binding.kind == PredictorKind::associative)
                roles.insert({Symbol("cue"), Symbol("value")});
        }
        roles_.assign(roles.begin(), roles.end());

        trace_.header = TraceHeader{trace_version, options_.seed, to_string(options_.mode), model_.cycle_length_ms};
    }

    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    const ModelDefinition& model() const { return model_; }
    const RunOptions& options() const { return options_; }
    std::int64_t cycle() const { return clock_.cycle(); }
    Millis now() const { return clock_.now(); }
    bool halted() const { return halted_; }
    bool finished() const { return finished_; }
    const Trace& trace() const { return trace_; }
    const WorkingMemory& wm() const { return wm_; }
    const MiddleMemory& mm() const { return mm_; }
    const Codebook& codebook() const { return book_; }
    const std::vector<ShadowSystem>& shadow_systems() const { return shadows_; }
    const std::vector<Production>& central_productions() const { return central_; }
    const std::vector<Symbol>& roles() const { return roles_; }

    // One full cycle. No-op once halted or finished.
    void step() {
        if (halted_ || finished_)
            return;
        const std::int64_t c = clock_.cycle();
        const Millis now = clock_.now();

        drain(c, now);

        for (const auto& f : mm_sweep(mm_, wm_, now))
            log(c, "forget", json{{"entry", f.id}, {"tag", f.tag.str()}, {"activation", f.activation}});

        // Central matches the state as it stood once this cycle's arrivals landed;
        // shadow writes made below become visible to it next cycle.
        const WorkingMemory snapshot = wm_;
        ActivationTable acts;
        if (options_.mode == Mode::mm) {
            acts = compute_activations(mm_, snapshot, now);
            run_shadows(c, now, snapshot, acts);
        }

        std::vector<std::pair<double, std::string>> rewards;
        bool halt = false;
        std::optional<Match> chosen = run_central(c, now, snapshot, rewards, halt);

        if (chosen)
            for (const auto& r : record_consumption(ledger_, chosen->wm_chunks, c))
                log(c, "consume", json{{"system", r.system.str()},
                                       {"production", r.production.str()},
                                       {"buffer", r.buffer.str()},
                                       {"chunk", r.chunk},
                                       {"deposit_cycle", r.deposit_cycle}});
        ledger_.retire_stale(wm_);

        for (const auto& r : model_.rewards)
            if (r.cycle == c)
                rewards.emplace_back(r.value, "schedule");
        for (const auto& [value, source] : rewards)
            apply_reward(c, now, value, source);

        if (options_.mode == Mode::mm)
            form_and_prune(c, now, acts);

        broadcast(c, now);

        log(c, "tick", json{{"now_ms", now}, {"mm_size", mm_.size()}});
        clock_.advance();
        if (halt)
            halted_ = true;
    }

    // Steps up to n cycles (fewer if a production halts), then closes the trace.
    const Trace& run(std::int64_t n) {
        if (n < 0)
            throw invalid_argument("cycle count must be non-negative");
        for (std::int64_t i = 0; i < n && !halted_; ++i)
            step();
        return finish();
    }

    // Appends the closing halt event. Idempotent.
    const Trace& finish() {
        if (!finished_) {
            const std::int64_t c = clock_.cycle() > 0 ? clock_.cycle() - 1 : 0;
            log(c, "halt", json{{"reason", halted_ ? "action" : "cycles"}, {"cycles", clock_.cycle()}});
            finished_ = true;
        }
        return trace_;
    }

    // Stable text dump of the current state.
    std::string inspect(std::size_t top_k = 5) const {
        std::ostringstream out;
        out << std::fixed << std::setprecision(6);
        out << "cycle " << clock_.cycle() << " (" << clock_.now() << " ms) mode " << to_string(options_.mode)
            << (halted_ ? " halted" : "") << "\n";
        out << "working memory:\n";
        for (const auto& b : wm_.buffers()) {
            out << "  " << b.name.str() << " [" << b.owner.str() << "]";
            if (b.urgent)
                out << " URGENT";
            if (b.content)
                out << " #" << b.content->id << " " << to_string(*b.content);
            else if (b.query)
                out << " query #" << b.query->id << " " << to_string(b.query->query);
            else
                out << " empty";
            out << "\n";
        }
        const ActivationTable acts = compute_activations(mm_, wm_, clock_.now());
        std::vector<Ranked> ranked;
        for (const auto& [id, a] : acts)
            ranked.push_back({id, a});
        std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
            return a.activation != b.activation ? a.activation > b.activation : a.id < b.id;
        });
        out << "middle memory: " << mm_.size() << " entries\n";
        for (std::size_t i = 0; i < ranked.size() && i < top_k; ++i) {
            const MMEntry& e = mm_.at(ranked[i].id);
            out << "  " << e.id << " " << e.tag.str() << " A=" << ranked[i].activation << " ";
            if (e.chunk)
                out << to_string(*e.chunk);
            else
                out << "<vector>";
            out << "\n";
        }
        out << "conflict set";
        if (last_match_cycle_)
            out << " (cycle " << *last_match_cycle_ << ")";
        out << ":\n";
        for (const auto& [name, utility, selected] : last_conflict_)
            out << "  " << name << " U=" << utility << (selected ? " selected" : "") << "\n";
        out << "utilities:\n";
        for (const auto& p : central_)
            out << "  central/" << p.name.str() << " " << p.utility << "\n";
        for (const auto& s : shadows_)
            for (const auto& p : s.productions)
                out << "  " << s.name.str() << "/" << p.name.str() << " " << p.utility
                    << (p.permanent ? "" : " provisional") << "\n";
        return out.str();
    }

private:
    struct PredictorSlot {
        PredictorBinding binding;
        std::unique_ptr<ReferencePredictor> reference;
        std::unique_ptr<ExternalPredictor> external;
        bool stall_reported = false;
    };

    static ModelDefinition validated(ModelDefinition m) {
        if (auto ds = validate_model(m); !ds.empty())
            throw model_invalid(std::move(ds));
        return m;
    }

    MMParams mm_params() const {
        const auto& c = model_.middle_memory;
        return MMParams{c.decay, c.spreading, c.retrieval_threshold, c.forgetting_threshold, c.noise, options_.seed};
    }

    void log(std::int64_t c, const char* kind, json data = json::object()) { trace_.append(c, kind, std::move(data)); }

    json write_json(const WmWrite& w) const {
        json j{{"writer", w.writer.str()}, {"buffer", w.buffer.str()}, {"op", to_string(w.op)}};
        if (w.op != WriteOp::clear) {
            j["chunk"] = w.chunk;
            j["content"] = w.content;
        }
        j["urgent"] = w.urgent;
        return j;
    }

    // Where a prediction lands in pipeline mode: the predictor's declared
    // buffer, else the buffer of the first shadow system subscribed to its tag.
    std::optional<Symbol> pipeline_target(const PredictorBinding& b) const {
        if (b.buffer)
            return b.buffer;
        for (const auto& s : shadows_)
            if (std::find(s.subscriptions.begin(), s.subscriptions.end(), b.tag) != s.subscriptions.end())
                return s.buffer;
        return std::nullopt;
    }

    const PredictorBinding* binding_of(const Symbol& name) const {
        for (const auto& p : predictors_)
            if (p.binding.name == name)
                return &p.binding;
        return nullptr;
    }

    // Phase 1.
    void drain(std::int64_t c, Millis now) {
        for (auto& msg : queue_.drain()) {
            std::optional<Prediction> pred;
            if (auto* p = std::get_if<Prediction>(&msg.body)) {
                pred = std::move(*p);
            } else {
                const std::string& raw = std::get<std::string>(msg.body);
                const PredictorBinding* b = binding_of(msg.predictor);
                auto parsed = parse_prediction_line(raw, book_.dimension());
                if (auto* why = std::get_if<std::string>(&parsed)) {
                    log(c, "error", json{{"source", msg.predictor.str()}, {"message", *why}, {"raw", raw}});
                    continue;
                }
                auto& w = std::get<WirePrediction>(parsed);
                if (!w.tag.empty() && w.tag != b->tag.str()) {
                    log(c, "error", json{{"source", msg.predictor.str()},
                                         {"message", "tag '" + w.tag + "' does not match binding tag '" +
                                                         b->tag.str() + "'"},
                                         {"raw", raw}});
                    continue;
                }
                pred = Prediction{b->tag, std::move(w.vector), std::move(w.chunk), w.salience, msg.cycle};
            }
            if (options_.mode == Mode::mm)
                deposit(c, now, msg, *pred);
            else
                pipe(c, msg, *pred);
        }
    }

    void deposit(std::int64_t c, Millis now, const QueuedMessage& msg, const Prediction& p) {
        // Stamped with the end of the previous cycle, when the prediction was made.
        const Millis at = std::max(now - clock_.cycle_length(), mm_.latest());
        if (p.vector && p.vector->dim() != book_.dimension()) {
            log(c, "error", json{{"source", msg.predictor.str()}, {"message", "vector dimension mismatch"}});
            return;
        }
        Deposit d = mm_.deposit(p.chunk, p.vector ? std::optional<HoloVector>(p.vector->normalized()) : std::nullopt,
                                p.tag, at);
        json j{{"source", msg.predictor.str()}, {"tag", p.tag.str()}, {"entry", d.id}, {"created", d.created},
               {"time_ms", at}, {"produced_cycle", msg.cycle}, {"salience", p.salience}};
        if (p.chunk)
            j["chunk"] = to_string(*p.chunk);
        else
            j["vector_dim"] = p.vector->dim();
        log(c, "deposit", std::move(j));
    }

    void pipe(std::int64_t c, const QueuedMessage& msg, const Prediction& p) {
        std::optional<Symbol> target;
        if (msg.predictor == script_source()) {
            for (const auto& s : shadows_)
                if (std::find(s.subscriptions.begin(), s.subscriptions.end(), p.tag) != s.subscriptions.end()) {
                    target = s.buffer;
                    break;
                }
        } else if (const PredictorBinding* b = binding_of(msg.predictor)) {
            target = pipeline_target(*b);
        }
        if (!target) {
            log(c, "error", json{{"source", msg.predictor.str()}, {"message", "no buffer receives tag '" + p.tag.str() + "'"}});
            return;
        }
        std::optional<Chunk> chunk = p.chunk;
        if (!chunk && p.vector)
            chunk = unpack(*p.vector, roles_, book_, model_.middle_memory.cleanup_threshold).chunk();
        if (!chunk) {
            log(c, "error", json{{"source", msg.predictor.str()}, {"message", "vector prediction did not decode"}});
            return;
        }
        chunk->id = ids_.next();
        inflow_[*target].push_back(*chunk);
        Buffer& b = wm_.at(*target);
        WmWrite w{msg.predictor, *target, WriteOp::write, chunk->id, false, to_string(*chunk)};
        b.content = std::move(*chunk);
        b.query.reset();
        b.urgent = false;
        json j = write_json(w);
        j["via"] = "pipeline";
        log(c, "wm-write", std::move(j));
    }

    // Phase 3.
    void run_shadows(std::int64_t c, Millis now, const WorkingMemory& snapshot, const ActivationTable& acts) {
        std::vector<std::optional<ShadowOutcome>> outcomes(shadows_.size());
        for (std::size_t idx : step_order_) {
            ShadowSystem& s = shadows_[idx];
            if (c % s.period != 0)
                continue;
            outcomes[idx] = shadow_step(s, snapshot, mm_, acts, now);
        }
        for (std::size_t idx = 0; idx < shadows_.size(); ++idx) {
            if (!outcomes[idx] || outcomes[idx]->kind == ShadowOutcome::Kind::idle)
                continue;
            const ShadowSystem& s = shadows_[idx];
            ShadowOutcome& o = *outcomes[idx];
            const bool answered = o.kind == ShadowOutcome::Kind::answered;
            json j{{"system", s.name.str()}};
            if (answered) {
                j["production"] = nullptr;
                j["answered_from"] = o.answered_from ? json(*o.answered_from) : json(nullptr);
            } else {
                j["production"] = o.production.str();
                j["bindings"] = detail::bindings_json(o.bindings);
                j["mm_entries"] = detail::ids_json(o.mm_entries);
            }
            log(c, "shadow-fire", std::move(j));
            for (auto& op : o.firing.ops)
                commit(c, now, s.name, op, answered ? nullptr : &o.production);
        }
    }

    void commit(std::int64_t c, Millis now, const Symbol& writer, BufferOp& op, const Symbol* production) {
        WmWrite w;
        switch (op.op) {
        case WriteOp::write:
            op.chunk->id = ids_.next();
            w = wm_write(wm_, writer, op.buffer, *op.chunk, op.urgent);
            break;
        case WriteOp::clear:
            w = wm_clear(wm_, writer, op.buffer);
            break;
        case WriteOp::query:
            w = wm_post_query(wm_, writer, op.buffer, PendingQuery{*op.query, ids_.next()});
            break;
        }
        log(c, "wm-write", write_json(w));
        if (op.op == WriteOp::write && production && writer != central_owner())
            ledger_.deposit({writer, *production, op.buffer, w.chunk, c, now, std::nullopt});
        if (op.urgent && writer != central_owner())
            log(c, "interrupt", json{{"system", writer.str()}, {"buffer", op.buffer.str()}, {"chunk", w.chunk}});
    }

    // Phase 4.
    std::optional<Match> run_central(std::int64_t c, Millis now, const WorkingMemory& snapshot,
                                     std::vector<std::pair<double, std::string>>& rewards, bool& halt) {
        MatchSurface surface{snapshot, nullptr, nullptr, {}, options_.mode == Mode::pipeline ? &inflow_ : nullptr};
        MatchStats stats;
        auto conflict = match_all(central_, surface, &stats);
        auto winner = resolve(conflict, central_, true);

        json cs = json::array();
        last_conflict_.clear();
        for (std::size_t i = 0; i < conflict.size(); ++i) {
            const Production& p = central_[conflict[i].production];
            json used = json::array();
            for (const auto& [b, id] : conflict[i].wm_chunks)
                used.push_back(json::array({b.str(), id}));
            cs.push_back(json{{"production", p.name.str()}, {"utility", p.utility}, {"urgent", conflict[i].urgent},
                              {"wm", std::move(used)}});
            last_conflict_.emplace_back(p.name.str(), p.utility, winner && *winner == i);
        }
        last_match_cycle_ = c;
        log(c, "match", json{{"candidates", stats.candidates},
                             {"conflict", std::move(cs)},
                             {"selected", winner ? json(central_[conflict[*winner].production].name.str()) : json(nullptr)}});
        if (!winner) {
            log(c, "idle");
            return std::nullopt;
        }

        Match m = conflict[*winner];
        Production& p = central_[m.production];
        log(c, "central-fire", json{{"production", p.name.str()}, {"utility", p.utility},
                                    {"bindings", detail::bindings_json(m.bindings)}});
        Firing f = fire(p, m.bindings, now);
        for (auto& op : f.ops)
            commit(c, now, central_owner(), op, &p.name);
        learner_.record(p.name, now);
        for (double r : f.rewards)
            rewards.emplace_back(r, p.name.str());
        halt = f.halt;
        return m;
    }

    // Phase 6.
    void apply_reward(std::int64_t c, Millis now, double value, const std::string& source) {
        log(c, "reward", json{{"value", value}, {"source", source}});
        auto log_update = [&](const UtilityUpdate& u, const char* via) {
            log(c, "utility-update", json{{"production", u.production.str()},
                                          {"owner", u.owner.str()},
                                          {"via", via},
                                          {"before", u.before},
                                          {"after", u.after},
                                          {"effective_reward", u.effective_reward},
                                          {"permanent", u.permanent}});
        };
        for (const auto& u : update_utilities(learner_, central_, value, now))
            log_update(u, "central");
        ProductionLookup lookup = [this](const Symbol& system, const Symbol& production) -> Production* {
            for (auto& s : shadows_)
                if (s.name == system)
                    return find_production(s.productions, production);
            return nullptr;
        };
        for (const auto& u :
             propagate_credit(ledger_, value, now, learner_.alpha, learner_.time_cost, lookup))
            log_update(u, "credit");
    }

    bool production_name_taken(const Symbol& name) const {
        for (const auto& p : central_)
            if (p.name == name)
                return true;
        for (const auto& s : shadows_)
            for (const auto& p : s.productions)
                if (p.name == name)
                    return true;
        return false;
    }

    // Phase 7.
    void form_and_prune(std::int64_t c, Millis now, const ActivationTable& acts) {
        for (auto& s : shadows_) {
            if (!s.form_productions)
                continue;
            for (const auto& [id, e] : mm_.entries()) {
                if (std::find(s.subscriptions.begin(), s.subscriptions.end(), e.tag) == s.subscriptions.end())
                    continue;
                auto a = acts.find(id);
                if (a == acts.end())
                    continue;
                auto p = form_retrieval_production(e, a->second, s.name, s.buffer,
                                                   model_.middle_memory.formation_threshold, s.productions, now);
                if (!p)
                    continue;
                if (production_name_taken(p->name))
                    p->name = Symbol(p->name.str() + "-" + s.name.str());
                log(c, "formed", json{{"production", p->name.str()}, {"system", s.name.str()}, {"entry", id},
                                      {"activation", a->second}, {"pattern", to_string(p->conditions[0].pattern)}});
                s.productions.push_back(std::move(*p));
            }
        }
        for (auto& s : shadows_)
            for (const auto& pr : prune_provisional(s.productions, now, model_.learning.ttl_ms))
                log(c, "pruned", json{{"production", pr.production.str()}, {"system", pr.owner.str()}, {"age_ms", pr.age}});
    }

    // Phase 8.
    void broadcast(std::int64_t c, Millis now) {
        ContextVector cv = context_vector(wm_, mm_, book_, now, model_.middle_memory.wm_weight);
        std::vector<Symbol> symbols;
        for (const auto& d : top_symbols(cv.vector, roles_, book_,
                                         static_cast<std::size_t>(model_.middle_memory.context_symbols),
                                         model_.middle_memory.cleanup_threshold))
            symbols.push_back(d.symbol);
        json syms = json::array();
        for (const auto& s : symbols)
            syms.push_back(s.str());

        for (auto& slot : predictors_) {
            json j{{"predictor", slot.binding.name.str()}, {"zero", cv.zero}, {"symbols", syms}};
            if (slot.reference) {
                auto preds = slot.reference->predict(Delivery{cv.vector, symbols, c, cv.zero});
                j["emitted"] = preds.size();
                for (auto& p : preds)
                    queue_.push(c, slot.binding.name, std::move(p));
            } else {
                const bool ok = slot.external->deliver(cv.vector, symbols, c);
                j["stalled"] = !ok;
                if (!ok && !slot.stall_reported && slot.external->stalled()) {
                    slot.stall_reported = true;
                    log(c, "error", json{{"source", slot.binding.name.str()},
                                         {"message", "predictor stalled: " + slot.external->reason()}});
                }
            }
            log(c, "delivery", std::move(j));
        }
        for (const auto& d : model_.scripted_deposits)
            if (d.cycle == c)
                queue_.push(c, script_source(), Prediction{d.tag, std::nullopt, d.chunk, 1.0, c});
    }

    ModelDefinition model_;
    RunOptions options_;
    Clock clock_;
    Codebook book_;
    WorkingMemory wm_;
    MiddleMemory mm_;
    ChunkIds ids_;
    std::vector<ShadowSystem> shadows_; // name order
    std::vector<std::size_t> step_order_;
    std::vector<Production> central_;
    UtilityLearner learner_;
    ContributionLedger ledger_;
    IngestionQueue queue_;
    std::vector<PredictorSlot> predictors_; // name order
    Inflow inflow_;
    std::vector<Symbol> roles_;
    Trace trace_;
    bool halted_ = false;
    bool finished_ = false;
    std::vector<std::tuple<std::string, double, bool>> last_conflict_;
    std::optional<std::int64_t> last_match_cycle_;
};

inline Trace run_model(const ModelDefinition& m, std::int64_t cycles, RunOptions options = {}) {
    Runtime rt(m, std::move(options));
    return rt.run(cycles);
}

} // namespace mmarch
