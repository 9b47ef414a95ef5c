#pragma once

// The generative seam. Every cycle the runtime broadcasts a context vector
// (plus its best-decoded symbols) to each predictor; predictors answer with
// tagged predictions that land in a thread-safe ingestion queue and reach
// middle memory only when the queue is drained at the next cycle boundary.
//
// Two small reference predictors live here (an order-k n-gram model with
// backoff and a cue->associate count table) together with the line-delimited
// JSON protocol spoken by external predictors over a child process's
// stdin/stdout or a TCP connection.

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <tuple>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "mmarch/json_io.hpp"

namespace mmarch {

struct Prediction {
    Symbol tag;
    std::optional<HoloVector> vector;
    std::optional<Chunk> chunk;
    double salience = 1.0;
    std::int64_t cycle = 0; // cycle whose context produced it
};

enum class PredictorKind { ngram, associative, external };

inline const char* to_string(PredictorKind k) {
    switch (k) {
    case PredictorKind::ngram: return "ngram";
    case PredictorKind::associative: return "associative";
    case PredictorKind::external: return "external";
    }
    return "?";
}

inline std::optional<PredictorKind> parse_predictor_kind(std::string_view s) {
    for (auto k : {PredictorKind::ngram, PredictorKind::associative, PredictorKind::external})
        if (s == to_string(k))
            return k;
    return std::nullopt;
}

struct Association {
    Symbol cue;
    Symbol associate;
    std::uint64_t count = 1;
    bool operator==(const Association&) const = default;
};

struct PredictorBinding {
    Symbol name;
    Symbol tag;
    PredictorKind kind = PredictorKind::ngram;
    std::int64_t rate = 1; // emissions per cycle
    std::uint64_t seed = 0;
    std::optional<Symbol> buffer; // pipeline mode target; defaults to the tag's subscriber
    std::optional<Symbol> chunk_type;

    // ngram
    std::int64_t order = 2;
    std::vector<std::vector<Symbol>> corpus;
    // associative
    std::vector<Association> pairs;
    // external: either a command line or "tcp://host:port"
    std::vector<std::string> command;
    std::string endpoint;

    bool operator==(const PredictorBinding&) const = default;
};

struct Candidate {
    Symbol symbol;
    double salience = 0.0;
    std::optional<Symbol> context; // the context symbol the guess is conditioned on
};

// Count-based n-gram model: longest matching context suffix, backing off to
// shorter ones down to unigrams. Ties go to the lexicographically smaller symbol.
class NgramModel {
public:
    explicit NgramModel(std::size_t order = 2) : order_(order) {
        if (order == 0)
            throw invalid_argument("n-gram order must be at least 1");
    }

    void train(std::span<const std::vector<Symbol>> corpus) {
        for (const auto& seq : corpus) {
            for (std::size_t i = 0; i < seq.size(); ++i) {
                vocabulary_.insert(seq[i]);
                for (std::size_t len = 0; len < order_ && len <= i; ++len) {
                    std::vector<Symbol> ctx(seq.begin() + static_cast<std::ptrdiff_t>(i - len),
                                            seq.begin() + static_cast<std::ptrdiff_t>(i));
                    ++counts_[std::move(ctx)][seq[i]];
                }
            }
        }
    }

    bool empty() const { return vocabulary_.empty(); }
    std::size_t order() const { return order_; }
    const std::set<Symbol>& vocabulary() const { return vocabulary_; }

    // `context` is oldest-first. Salience is the conditional probability.
    std::vector<Candidate> predict(std::span<const Symbol> context, std::size_t n = 1) const {
        std::vector<Candidate> out;
        if (empty() || n == 0)
            return out;
        for (std::size_t len = std::min(order_ - 1, context.size());; --len) {
            std::vector<Symbol> key(context.end() - static_cast<std::ptrdiff_t>(len), context.end());
            if (auto it = counts_.find(key); it != counts_.end()) {
                std::vector<std::pair<Symbol, std::uint64_t>> ranked(it->second.begin(), it->second.end());
                std::uint64_t total = 0;
                for (const auto& [_, c] : ranked)
                    total += c;
                std::stable_sort(ranked.begin(), ranked.end(),
                                 [](const auto& a, const auto& b) { return a.second > b.second; });
                for (std::size_t i = 0; i < ranked.size() && out.size() < n; ++i)
                    out.push_back({ranked[i].first,
                                   static_cast<double>(ranked[i].second) / static_cast<double>(total),
                                   len ? std::optional<Symbol>(key.back()) : std::nullopt});
                return out;
            }
            if (len == 0)
                break;
        }
        return out;
    }

private:
    std::size_t order_;
    std::set<Symbol> vocabulary_;
    std::map<std::vector<Symbol>, std::map<Symbol, std::uint64_t>> counts_;
};

// Directed cue -> associate counts. Salience is the count normalised by the
// cue's row total.
class AssociativeModel {
public:
    void add(const Symbol& cue, const Symbol& associate, std::uint64_t count = 1) {
        table_[cue][associate] += count;
    }

    bool empty() const { return table_.empty(); }

    std::vector<Candidate> predict(std::span<const Symbol> context, std::size_t n = 1) const {
        struct Best {
            std::uint64_t count;
            double salience;
            Symbol cue;
        };
        std::map<Symbol, Best> best;
        for (const auto& cue : context) {
            auto row = table_.find(cue);
            if (row == table_.end())
                continue;
            std::uint64_t total = 0;
            for (const auto& [_, c] : row->second)
                total += c;
            for (const auto& [sym, c] : row->second) {
                const double sal = static_cast<double>(c) / static_cast<double>(total);
                auto it = best.find(sym);
                if (it == best.end() || c > it->second.count ||
                    (c == it->second.count && sal > it->second.salience))
                    best[sym] = Best{c, sal, cue};
            }
        }
        std::vector<std::pair<Symbol, Best>> ranked(best.begin(), best.end());
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.second.count > b.second.count; });
        std::vector<Candidate> out;
        for (std::size_t i = 0; i < ranked.size() && out.size() < n; ++i)
            out.push_back({ranked[i].first, ranked[i].second.salience, ranked[i].second.cue});
        return out;
    }

private:
    std::map<Symbol, std::map<Symbol, std::uint64_t>> table_;
};

// What every predictor receives each cycle.
struct Delivery {
    const HoloVector& context;
    std::span<const Symbol> symbols; // best-decoded symbols, most similar first
    std::int64_t cycle = 0;
    bool zero = false;
};

// In-process predictor backed by one of the reference models. Emits up to
// `rate` predictions per delivery as chunks
//   ngram:       {isa:<type> after:<last context symbol> value:<next>}
//   associative: {isa:<type> cue:<cue> value:<associate>}
class ReferencePredictor {
public:
    explicit ReferencePredictor(const PredictorBinding& b) : binding_(b), ngram_(static_cast<std::size_t>(std::max<std::int64_t>(b.order, 1))) {
        if (b.kind == PredictorKind::ngram) {
            ngram_.train(b.corpus);
            type_ = b.chunk_type.value_or(Symbol("word"));
        } else if (b.kind == PredictorKind::associative) {
            for (const auto& p : b.pairs)
                assoc_.add(p.cue, p.associate, p.count);
            type_ = b.chunk_type.value_or(Symbol("association"));
        } else {
            throw invalid_argument("external predictors are not reference predictors");
        }
    }

    const PredictorBinding& binding() const { return binding_; }

    std::vector<Prediction> predict(const Delivery& d) const {
        const auto n = static_cast<std::size_t>(std::max<std::int64_t>(binding_.rate, 0));
        std::vector<Candidate> cands;
        Symbol context_slot;
        if (binding_.kind == PredictorKind::ngram) {
            // Most similar symbol is taken as the most recent token.
            std::vector<Symbol> ctx;
            for (const auto& s : d.symbols)
                if (ngram_.vocabulary().count(s) && ctx.size() + 1 < ngram_.order())
                    ctx.push_back(s);
            std::reverse(ctx.begin(), ctx.end());
            cands = ngram_.predict(ctx, n);
            context_slot = Symbol("after");
        } else {
            cands = assoc_.predict(d.symbols, n);
            context_slot = Symbol("cue");
        }
        std::vector<Prediction> out;
        for (const auto& c : cands) {
            Chunk chunk{type_, {}, 0};
            if (c.context)
                chunk.slots.emplace_back(context_slot, *c.context);
            chunk.slots.emplace_back(Symbol("value"), c.symbol);
            out.push_back(Prediction{binding_.tag, std::nullopt, std::move(chunk), c.salience, d.cycle});
        }
        return out;
    }

private:
    PredictorBinding binding_;
    NgramModel ngram_;
    AssociativeModel assoc_;
    Symbol type_;
};

// ---- wire protocol -------------------------------------------------------

inline std::string format_context_line(const HoloVector& context, std::span<const Symbol> symbols,
                                       std::int64_t cycle) {
    json syms = json::array();
    for (const auto& s : symbols)
        syms.push_back(s.str());
    json j{{"type", "context"},
           {"cycle", cycle},
           {"dim", context.dim()},
           {"vector", vector_to_json(context)},
           {"symbols", std::move(syms)}};
    return j.dump() + "\n";
}

struct WirePrediction {
    std::string tag;
    double salience = 1.0;
    std::optional<Chunk> chunk;
    std::optional<HoloVector> vector;
};

// Parses one predictor->runtime line. Unknown fields are ignored. Returns the
// reason on failure.
inline std::variant<WirePrediction, std::string> parse_prediction_line(std::string_view line,
                                                                       std::size_t dim) {
    try {
        json j = json::parse(line);
        if (!j.is_object())
            return std::string("message is not a JSON object");
        if (!j.contains("type") || j["type"] != "prediction")
            return std::string("message type is not \"prediction\"");
        WirePrediction p;
        if (j.contains("tag")) {
            if (!j["tag"].is_string())
                return std::string("tag must be a string");
            p.tag = j["tag"].get<std::string>();
        }
        if (j.contains("salience")) {
            if (!j["salience"].is_number())
                return std::string("salience must be a number");
            p.salience = j["salience"].get<double>();
            if (!std::isfinite(p.salience))
                return std::string("salience must be finite");
        }
        if (j.contains("chunk"))
            p.chunk = chunk_from_json(j["chunk"]);
        if (j.contains("vector")) {
            p.vector = vector_from_json(j["vector"]);
            if (p.vector->dim() != dim)
                return "vector has " + std::to_string(p.vector->dim()) + " entries, expected " +
                       std::to_string(dim);
        }
        if (!p.chunk && !p.vector)
            return std::string("prediction carries neither chunk nor vector");
        return p;
    } catch (const std::exception& e) {
        return std::string(e.what());
    }
}

// ---- ingestion -----------------------------------------------------------

struct QueuedMessage {
    std::int64_t cycle = 0;  // broadcast cycle the message answers
    Symbol predictor;
    std::uint64_t index = 0; // per-predictor emission counter
    std::variant<Prediction, std::string> body; // parsed, or a raw external line
};

// Multi-producer queue, drained by the cycle loop only.
class IngestionQueue {
public:
    void push(std::int64_t cycle, const Symbol& predictor, std::variant<Prediction, std::string> body) {
        std::lock_guard lock(mutex_);
        messages_.push_back({cycle, predictor, counters_[predictor]++, std::move(body)});
    }

    // Everything queued so far, ordered by (cycle, predictor, emission index).
    std::vector<QueuedMessage> drain() {
        std::vector<QueuedMessage> out;
        {
            std::lock_guard lock(mutex_);
            out.swap(messages_);
        }
        std::sort(out.begin(), out.end(), [](const QueuedMessage& a, const QueuedMessage& b) {
            return std::tie(a.cycle, a.predictor, a.index) < std::tie(b.cycle, b.predictor, b.index);
        });
        return out;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return messages_.size();
    }

private:
    mutable std::mutex mutex_;
    std::vector<QueuedMessage> messages_;
    std::map<Symbol, std::uint64_t> counters_;
};

// An out-of-process predictor. The runtime never blocks on it: contexts are
// written non-blockingly and replies are read on a background thread into the
// ingestion queue. A dead, unreachable or backed-up peer is reported stalled.
class ExternalPredictor {
public:
    ExternalPredictor(PredictorBinding binding, IngestionQueue& queue)
        : binding_(std::move(binding)), queue_(queue) {
        if (!binding_.endpoint.empty())
            connect_tcp();
        else if (!binding_.command.empty())
            spawn();
        else
            fail("no command or endpoint configured");
        if (fd_ >= 0)
            reader_ = std::thread([this] { read_loop(); });
    }

    ExternalPredictor(const ExternalPredictor&) = delete;
    ExternalPredictor& operator=(const ExternalPredictor&) = delete;

    ~ExternalPredictor() {
        stop_ = true;
        if (reader_.joinable())
            reader_.join();
        if (fd_ >= 0)
            ::close(fd_);
        if (child_ > 0) {
            ::kill(child_, SIGTERM);
            ::waitpid(child_, nullptr, 0);
        }
    }

    const PredictorBinding& binding() const { return binding_; }
    bool stalled() const { return stalled_; }

    std::string reason() const {
        std::lock_guard lock(reason_mutex_);
        return reason_;
    }

    // Sends one context line. Returns false if the line could not be handed
    // to the peer without blocking; a failed write also stalls the predictor.
    bool deliver(const HoloVector& context, std::span<const Symbol> symbols, std::int64_t cycle) {
        current_cycle_ = cycle;
        if (stalled_ || fd_ < 0)
            return false;
        if (!outbox_.empty() && !flush()) {
            return false; // previous context still in flight: skip this one
        }
        outbox_ = format_context_line(context, symbols, cycle);
        return flush();
    }

private:
    void fail(const std::string& why) {
        std::lock_guard lock(reason_mutex_);
        if (reason_.empty())
            reason_ = why;
        stalled_ = true;
    }

    // True once the whole outbox has been written.
    bool flush() {
        while (!outbox_.empty()) {
            ssize_t n = ::send(fd_, outbox_.data(), outbox_.size(), MSG_NOSIGNAL | MSG_DONTWAIT);
            if (n > 0) {
                outbox_.erase(0, static_cast<std::size_t>(n));
                continue;
            }
            if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK))
                return false;
            fail(std::string("write failed: ") + std::strerror(errno));
            return false;
        }
        return true;
    }

    void spawn() {
        int sv[2];
        if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
            fail(std::string("socketpair: ") + std::strerror(errno));
            return;
        }
        std::vector<char*> argv;
        for (auto& a : binding_.command)
            argv.push_back(a.data());
        argv.push_back(nullptr);
        pid_t pid = ::fork();
        if (pid < 0) {
            ::close(sv[0]);
            ::close(sv[1]);
            fail(std::string("fork: ") + std::strerror(errno));
            return;
        }
        if (pid == 0) {
            ::dup2(sv[1], STDIN_FILENO);
            ::dup2(sv[1], STDOUT_FILENO);
            ::execvp(argv[0], argv.data());
            ::_exit(127);
        }
        ::close(sv[1]);
        child_ = pid;
        fd_ = sv[0];
    }

    void connect_tcp() {
        constexpr std::string_view scheme = "tcp://";
        std::string_view ep = binding_.endpoint;
        if (ep.substr(0, scheme.size()) == scheme)
            ep.remove_prefix(scheme.size());
        auto colon = ep.rfind(':');
        if (colon == std::string_view::npos) {
            fail("endpoint must be tcp://host:port");
            return;
        }
        std::string host(ep.substr(0, colon)), port(ep.substr(colon + 1));
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
            fail(std::string("resolve ") + binding_.endpoint + ": " + ::gai_strerror(rc));
            return;
        }
        for (addrinfo* a = res; a; a = a->ai_next) {
            int fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
            if (fd < 0)
                continue;
            if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
                fd_ = fd;
                break;
            }
            ::close(fd);
        }
        ::freeaddrinfo(res);
        if (fd_ < 0)
            fail("cannot connect to " + binding_.endpoint);
    }

    void read_loop() {
        std::string pending;
        char buf[4096];
        while (!stop_) {
            pollfd p{fd_, POLLIN, 0};
            int rc = ::poll(&p, 1, 20);
            if (rc < 0 && errno != EINTR)
                break;
            if (rc <= 0)
                continue;
            ssize_t n = ::recv(fd_, buf, sizeof buf, MSG_DONTWAIT);
            if (n == 0) {
                fail("peer closed the connection");
                break;
            }
            if (n < 0) {
                if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)
                    continue;
                fail(std::string("read failed: ") + std::strerror(errno));
                break;
            }
            pending.append(buf, static_cast<std::size_t>(n));
            for (auto nl = pending.find('\n'); nl != std::string::npos; nl = pending.find('\n')) {
                std::string line = pending.substr(0, nl);
                pending.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r')
                    line.pop_back();
                if (!line.empty())
                    queue_.push(current_cycle_.load(), binding_.name, std::move(line));
            }
        }
    }

    PredictorBinding binding_;
    IngestionQueue& queue_;
    int fd_ = -1;
    pid_t child_ = -1;
    std::thread reader_;
    std::atomic<bool> stop_{false};
    std::atomic<bool> stalled_{false};
    std::atomic<std::int64_t> current_cycle_{-1};
    std::string outbox_;
    mutable std::mutex reason_mutex_;
    std::string reason_;
};

} // namespace mmarch
