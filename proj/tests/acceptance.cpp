// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>

#include "support.hpp"

using namespace mmarch;
using testing_support::bundled;

namespace {

// Pinned tolerances and values.
constexpr double demo_seconds_limit = 5.0;
constexpr int write_one_cases = 600;
constexpr double base_level_expected = 0.18823;
constexpr double base_level_tolerance = 1e-5;
constexpr int monotonicity_cases = 1000;
constexpr double closed_form_tolerance = 1e-9;
constexpr int closed_form_pairs = 20;
constexpr int latency_seeds = 50;
constexpr double pinned_mm_candidates = 5.234;
constexpr double pinned_pipeline_candidates = 439.002;
constexpr double pinned_codec_accuracy = 1.0;
constexpr double codec_accuracy_floor = 0.99;
constexpr double adjoint_floor = 0.9;
constexpr int adjoint_pairs = 1000;

const std::vector<std::string> demos{"threat.json",     "declarative.json",      "language.json",
                                     "comparison.json", "formation_reward.json", "formation_control.json"};

struct Verdict {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& why) {
        if (!cond && ok) {
            ok = false;
            detail = why;
        }
    }
};

int failures = 0;

void report(int n, const char* name, const std::function<Verdict()>& check) {
    Verdict v;
    try {
        v = check();
    } catch (const std::exception& e) {
        v.ok = false;
        v.detail = std::string("exception: ") + e.what();
    }
    failures += !v.ok;
    std::printf("%s %d %s: %s\n", v.ok ? "PASS" : "FAIL", n, name, v.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// ---- 1 ------------------------------------------------------------------------

Verdict seriality() {
    Verdict v;
    double slowest = 0.0;
    for (const auto& name : demos) {
        const auto m = bundled(name);
        const auto t0 = std::chrono::steady_clock::now();
        const Trace t = run_model(m, 200, {Mode::mm, 1, {}});
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        slowest = std::max(slowest, secs);
        std::map<std::int64_t, int> fires;
        std::int64_t ticks = 0;
        for (const auto& e : t.events) {
            fires[e.cycle] += e.kind == "central-fire";
            ticks += e.kind == "tick";
        }
        int worst = 0;
        for (const auto& [_, n] : fires)
            worst = std::max(worst, n);
        v.require(ticks >= 200, name + " ran only " + std::to_string(ticks) + " cycles");
        v.require(worst <= 1, name + " fired " + std::to_string(worst) + " central productions in one cycle");
        v.require(secs < demo_seconds_limit, name + " took " + fmt(secs) + " s");
    }
    if (v.ok)
        v.detail = std::to_string(demos.size()) + " demos x 200 cycles, 0 violations, slowest " + fmt(slowest) + " s";
    return v;
}

// ---- 2 ------------------------------------------------------------------------

// Random model: two central buffers holding a chunk each, 1-3 shadow systems
// owning one buffer apiece, each with a few always-matching productions whose
// actions pick a target buffer at random (mostly their own).
json random_model(std::mt19937_64& rng, bool& expect_valid) {
    expect_valid = true;
    const int shadows = 1 + static_cast<int>(rng() % 3);
    json buffers = json::array({json{{"name", "goal"}, {"owner", "central"}}, json{{"name", "scene"}, {"owner", "central"}}});
    std::vector<std::string> all{"goal", "scene"};
    for (int s = 0; s < shadows; ++s) {
        buffers.push_back(json{{"name", "buf" + std::to_string(s)}, {"owner", "sys" + std::to_string(s)}});
        all.push_back("buf" + std::to_string(s));
    }
    const char* kinds[] = {"write-buffer", "clear-buffer", "post-query"};
    json systems = json::array();
    int counter = 0;
    for (int s = 0; s < shadows; ++s) {
        const std::string own = "buf" + std::to_string(s);
        json prods = json::array();
        const int np = 1 + static_cast<int>(rng() % 3);
        for (int p = 0; p < np; ++p) {
            json actions = json::array();
            const int na = 1 + static_cast<int>(rng() % 2);
            for (int a = 0; a < na; ++a) {
                const std::string target = rng() % 4 == 0 ? all[rng() % all.size()] : own;
                if (target != own)
                    expect_valid = false;
                const std::string kind = kinds[rng() % 3];
                json act{{"kind", kind}, {"buffer", target}};
                if (kind == "write-buffer")
                    act["chunk"] = json{{"isa", "note"}, {"slots", {{"from", "sys" + std::to_string(s)},
                                                                      {"n", std::to_string(counter)}}}};
                else if (kind == "post-query")
                    act["query"] = json{{"isa", "note"}, {"slots", {{"n", "?"}}}};
                actions.push_back(std::move(act));
            }
            json conds = json::array();
            if (rng() % 2)
                conds.push_back(json{{"buffer", rng() % 2 ? "goal" : "scene"}, {"pattern", {{"isa", "?"}}}});
            prods.push_back(json{{"name", "p" + std::to_string(counter++)},
                                 {"utility", static_cast<double>(rng() % 5)},
                                 {"conditions", std::move(conds)},
                                 {"actions", std::move(actions)}});
        }
        systems.push_back(json{{"name", "sys" + std::to_string(s)},
                               {"buffer", own},
                               {"subscriptions", json::array({"notes"})},
                               {"productions", std::move(prods)}});
    }
    return json{{"name", "random"},
                {"codebook", {{"dimension", 64}, {"seed", 1}}},
                {"buffers", std::move(buffers)},
                {"shadow_systems", std::move(systems)},
                {"central_productions", json::array()},
                {"initial", {{"wm", json::array({json{{"buffer", "goal"}, {"chunk", {{"isa", "goal"}}}},
                                                 json{{"buffer", "scene"}, {"chunk", {{"isa", "scene"}}}}})}}}};
}

Verdict write_one() {
    Verdict v;
    std::mt19937_64 rng(20240601);
    int rejected = 0, accepted = 0;
    std::uint64_t shadow_writes = 0;
    for (int i = 0; i < write_one_cases && v.ok; ++i) {
        bool expect_valid = false;
        const json j = random_model(rng, expect_valid);
        std::optional<ModelDefinition> m;
        std::vector<Diagnostic> ds;
        try {
            m = load_model_json(j);
        } catch (const model_invalid& e) {
            ds = e.diagnostics;
        }
        if (!expect_valid) {
            const bool named = std::any_of(ds.begin(), ds.end(), [](const Diagnostic& d) {
                return d.message.find("write-one rule") != std::string::npos;
            });
            v.require(!m && named, "case " + std::to_string(i) + " with a foreign write was not rejected");
            ++rejected;
            continue;
        }
        v.require(m.has_value(), "case " + std::to_string(i) + " was rejected: " + format_diagnostics(ds));
        if (!m)
            continue;
        ++accepted;
        std::map<std::string, std::string> owner;
        for (const auto& b : m->buffers)
            owner[b.name.str()] = b.owner.str();
        const Trace t = run_model(*m, 20, {Mode::mm, static_cast<std::uint64_t>(i), {}});
        for (const auto& e : t.events) {
            if (e.kind != "wm-write")
                continue;
            const std::string writer = e.data["writer"];
            if (writer == "central")
                continue;
            ++shadow_writes;
            v.require(owner[e.data["buffer"].get<std::string>()] == writer,
                      "case " + std::to_string(i) + ": " + writer + " wrote " + e.data["buffer"].get<std::string>());
        }
    }
    v.require(rejected > 0 && accepted > 0, "generator did not cover both outcomes");
    if (v.ok)
        v.detail = std::to_string(write_one_cases) + " random models: " + std::to_string(rejected) + " rejected, " +
                   std::to_string(accepted) + " accepted, " + std::to_string(shadow_writes) +
                   " shadow writes all to own buffer";
    return v;
}

// ---- 3 ------------------------------------------------------------------------

Verdict activation_math() {
    Verdict v;
    const std::vector<Millis> pres{0, 2000};
    const double b = base_level(pres, 4000, 0.5);
    v.require(std::abs(b - base_level_expected) <= base_level_tolerance, "B = " + fmt(b));
    std::mt19937_64 rng(31337);
    for (int i = 0; i < monotonicity_cases && v.ok; ++i) {
        std::vector<Millis> ps;
        const int n = 1 + static_cast<int>(rng() % 12);
        for (int k = 0; k < n; ++k)
            ps.push_back(static_cast<Millis>(rng() % 120000));
        std::sort(ps.begin(), ps.end());
        const Millis now = ps.back() + 1 + static_cast<Millis>(rng() % 60000);
        const double d = 0.05 + 0.95 * static_cast<double>(rng() % 10000) / 10000.0;
        const double here = base_level(ps, now, d);
        auto more = ps;
        more.push_back(static_cast<Millis>(rng() % static_cast<std::uint64_t>(now)));
        std::sort(more.begin(), more.end());
        v.require(base_level(more, now, d) > here, "extra presentation did not raise B in case " + std::to_string(i));
        const Millis later = now + 1 + static_cast<Millis>(rng() % 30000);
        v.require(base_level(ps, later, d) < here, "time passing did not lower B in case " + std::to_string(i));
    }
    if (v.ok)
        v.detail = "B(4 s, 2 s; d=0.5) = " + fmt(b) + ", monotone in " + std::to_string(monotonicity_cases) +
                   " random cases";
    return v;
}

// ---- 4 ------------------------------------------------------------------------

// Replays utility-update events and checks that a shadow production is only
// ever credited for a deposit the central system consumed since the last reward.
void audit_credit(const Trace& t, const ModelDefinition& m, Runtime& rt, Verdict& v, const std::string& name,
                  std::uint64_t& credits) {
    std::map<std::pair<std::string, std::string>, int> consumed;
    std::map<std::pair<std::string, std::string>, double> replay;
    bool rewarded = false;
    for (const auto& s : m.shadow_systems)
        for (const auto& p : s.productions)
            replay[{s.name.str(), p.name.str()}] = p.utility;
    for (const auto& e : t.events) {
        if (e.kind == "consume") {
            ++consumed[{e.data["system"], e.data["production"]}];
        } else if (e.kind == "formed") {
            replay[{e.data["system"], e.data["production"]}] = 0.0;
        } else if (e.kind == "utility-update" && e.data["owner"] != "central") {
            const std::pair<std::string, std::string> key{e.data["owner"], e.data["production"]};
            v.require(e.data["via"] == "credit", name + ": shadow utility changed outside credit");
            v.require(consumed[key] > 0, name + ": " + key.second + " credited without a consumed deposit");
            --consumed[key];
            replay[key] = e.data["after"].get<double>();
            ++credits;
        } else if (e.kind == "reward") {
            rewarded = true;
        } else if (e.kind == "tick") {
            // a reward settles every consumed record
            if (rewarded)
                consumed.clear();
            rewarded = false;
        }
    }
    for (const auto& s : rt.shadow_systems())
        for (const auto& p : s.productions) {
            auto it = replay.find({s.name.str(), p.name.str()});
            v.require(it != replay.end() && it->second == p.utility,
                      name + ": " + p.name.str() + " utility differs from its credit history");
        }
}

Verdict utility_learning() {
    Verdict v;
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> alpha_dist(0.01, 1.0), reward_dist(-20.0, 20.0);
    double worst = 0.0;
    for (int i = 0; i < closed_form_pairs; ++i) {
        const double alpha = alpha_dist(rng), reward = reward_dist(rng);
        std::vector<Production> ps(1);
        ps[0].name = Symbol("p");
        ps[0].owner = central_owner();
        UtilityLearner learner{alpha, 0.0, {}};
        for (int n = 1; n <= 30; ++n) {
            learner.record(Symbol("p"), n * 50);
            update_utilities(learner, ps, reward, n * 50);
            const double closed = reward * (1.0 - std::pow(1.0 - alpha, n));
            worst = std::max(worst, std::abs(ps[0].utility - closed));
        }
    }
    v.require(worst <= closed_form_tolerance, "closed form off by " + fmt(worst));
    std::uint64_t credits = 0;
    for (const auto& name : demos) {
        const auto m = bundled(name);
        Runtime rt(m, {Mode::mm, 1, {}});
        const Trace& t = rt.run(300);
        audit_credit(t, m, rt, v, name, credits);
    }
    v.require(credits > 0, "no shadow credit occurred in any demo");
    if (v.ok)
        v.detail = std::to_string(closed_form_pairs) + " (alpha, R) pairs within " + fmt(worst) + "; " +
                   std::to_string(credits) + " shadow credits, each backed by a consumed deposit";
    return v;
}

// ---- 5 ------------------------------------------------------------------------

Verdict interrupt_latency() {
    Verdict v;
    const auto m = bundled("threat.json");
    std::uint64_t interrupts = 0;
    for (std::uint64_t seed = 1; seed <= latency_seeds; ++seed) {
        const auto r = compute_metrics(run_model(m, 200, {Mode::mm, seed, {}}));
        v.require(!r.interrupt_latencies.empty(), "seed " + std::to_string(seed) + ": no interrupt");
        v.require(r.unanswered_interrupts == 0, "seed " + std::to_string(seed) + ": interrupt never matched");
        for (auto l : r.interrupt_latencies)
            v.require(l == 1, "seed " + std::to_string(seed) + ": latency " + std::to_string(l));
        interrupts += r.interrupt_latencies.size();
    }
    if (v.ok)
        v.detail = std::to_string(interrupts) + " interrupts over " + std::to_string(latency_seeds) +
                   " seeds, all matched exactly one cycle later";
    return v;
}

// ---- 6 ------------------------------------------------------------------------

Verdict bottleneck() {
    Verdict v;
    const auto m = bundled("comparison.json");
    v.require(m.predictors.size() == 3, "workload has " + std::to_string(m.predictors.size()) + " predictors");
    for (const auto& p : m.predictors)
        v.require(p.rate == 1, p.name.str() + " rate is not 1");
    const auto mm = compute_metrics(run_model(m, 500, {Mode::mm, 1, {}}));
    const auto pipe = compute_metrics(run_model(m, 500, {Mode::pipeline, 1, {}}));
    v.require(pipe.candidates_mean > mm.candidates_mean, "pipeline load does not exceed mm load");
    v.require(mm.candidates_mean == pinned_mm_candidates, "mm mean " + fmt(mm.candidates_mean) + " != pinned");
    v.require(pipe.candidates_mean == pinned_pipeline_candidates,
              "pipeline mean " + fmt(pipe.candidates_mean) + " != pinned");
    v.detail = "mean central candidates pipeline " + fmt(pipe.candidates_mean) + " vs mm " +
               fmt(mm.candidates_mean) + ", ratio " + fmt(pipe.candidates_mean / mm.candidates_mean) +
               (v.ok ? "" : " (" + v.detail + ")");
    return v;
}

// ---- 7 ------------------------------------------------------------------------

Verdict codec() {
    Verdict v;
    Codebook book(1024, 2024);
    std::mt19937_64 rng(99);
    std::vector<Symbol> vocab, slot_names;
    for (int i = 0; i < 100; ++i)
        vocab.emplace_back("w" + std::to_string(i));
    for (int i = 0; i < 8; ++i)
        slot_names.emplace_back("slot" + std::to_string(i));
    int exact = 0;
    for (int t = 0; t < 1000; ++t) {
        Chunk c{vocab[rng() % 100], {}, 0};
        const std::size_t n = rng() % 9;
        for (std::size_t s = 0; s < n; ++s)
            c.slots.emplace_back(slot_names[s], vocab[rng() % 100]);
        std::vector<Symbol> wanted(slot_names.begin(), slot_names.begin() + static_cast<std::ptrdiff_t>(n));
        auto u = unpack(pack(c, book), wanted, book);
        exact += u.chunk() && same_content(*u.chunk(), c);
    }
    const double accuracy = exact / 1000.0;
    v.require(accuracy == pinned_codec_accuracy, "accuracy " + fmt(accuracy) + " != pinned");
    v.require(accuracy >= codec_accuracy_floor, "accuracy below floor");
    Codebook pairs(1024, 7);
    double worst = 1.0;
    for (int i = 0; i < adjoint_pairs; ++i) {
        const auto& a = pairs.atom(Symbol("a" + std::to_string(i)));
        const auto& b = pairs.atom(Symbol("b" + std::to_string(i)));
        worst = std::min(worst, cosine(unbind(bind(a, b), a), b));
    }
    v.require(worst > adjoint_floor, "adjoint similarity " + fmt(worst));
    if (v.ok)
        v.detail = "round-trip accuracy " + fmt(accuracy) + " on 1000 chunks; min unbind similarity " + fmt(worst) +
                   " over " + std::to_string(adjoint_pairs) + " pairs";
    return v;
}

// ---- 8 ------------------------------------------------------------------------

Verdict determinism() {
    Verdict v;
    int runs = 0;
    for (const auto& name : demos) {
        const auto m = bundled(name);
        for (Mode mode : {Mode::mm, Mode::pipeline}) {
            const std::string a = trace_text(run_model(m, 200, {mode, 11, {}}));
            const std::string b = trace_text(run_model(m, 200, {mode, 11, {}}));
            v.require(a == b, name + " " + to_string(mode) + " traces differ");
            runs += 2;
        }
    }
    const auto m = bundled("comparison.json");
    std::vector<Symbol> order;
    for (const auto& s : m.shadow_systems)
        order.push_back(s.name);
    std::sort(order.begin(), order.end());
    const std::string reference = trace_text(run_model(m, 200, {Mode::mm, 11, {}}));
    int perms = 0;
    do {
        v.require(trace_text(run_model(m, 200, {Mode::mm, 11, order})) == reference,
                  "shadow step order changed the trace");
        ++perms;
    } while (std::next_permutation(order.begin(), order.end()));
    if (v.ok)
        v.detail = std::to_string(runs) + " repeated runs byte-identical; " + std::to_string(perms) +
                   " shadow step orders byte-identical";
    return v;
}

// ---- 9 ------------------------------------------------------------------------

Verdict formation() {
    Verdict v;
    auto load = [&](const char* golden, const char* model) {
        const Trace pinned = read_trace(testing_support::slurp(testing_support::golden_path(golden)));
        const Trace fresh = run_model(bundled(model), 60, {Mode::mm, 1, {}});
        v.require(fresh == pinned, std::string(golden) + " no longer reproduces");
        return pinned;
    };
    const Trace reward = load("formation_reward.ndjson", "formation_reward.json");
    const Trace control = load("formation_control.ndjson", "formation_control.json");
    std::string formed;
    for (const Trace* t : {&reward, &control}) {
        int n = 0;
        for (const auto& e : t->events)
            if (e.kind == "formed") {
                ++n;
                formed = e.data["production"];
                v.require(e.data["activation"].get<double>() > bundled("formation_reward.json").middle_memory.formation_threshold,
                          "formed below threshold");
            }
        v.require(n == 1, "expected exactly one formed production");
    }
    auto permanent_credit = [&](const Trace& t) {
        for (const auto& e : t.events)
            if (e.kind == "utility-update" && e.data["production"] == formed && e.data["permanent"] == true)
                return true;
        return false;
    };
    auto pruned = [&](const Trace& t) {
        for (const auto& e : t.events)
            if (e.kind == "pruned" && e.data["production"] == formed)
                return true;
        return false;
    };
    v.require(permanent_credit(reward), "rewarded run never made " + formed + " permanent");
    v.require(!pruned(reward), "rewarded run pruned " + formed);
    v.require(!permanent_credit(control), "control run made " + formed + " permanent");
    v.require(pruned(control), "control run kept " + formed);
    if (v.ok)
        v.detail = formed + " formed in both runs; permanent after reward, pruned in the control";
    return v;
}

} // namespace

int main() {
    report(1, "seriality", seriality);
    report(2, "write-one rule", write_one);
    report(3, "activation math", activation_math);
    report(4, "utility learning and shadow credit", utility_learning);
    report(5, "interrupt latency", interrupt_latency);
    report(6, "serial bottleneck load", bottleneck);
    report(7, "codec fidelity", codec);
    report(8, "determinism", determinism);
    report(9, "production formation", formation);
    return failures == 0 ? 0 : 1;
}
