#pragma once

// Holographic reduced representations: circular-convolution binding over
// seeded unitary atoms, plus the pack/unpack codec between chunks and vectors.
//
// Atoms have unit magnitude at every frequency, so circular correlation is an
// exact inverse of binding and bound pairs of atoms are themselves unit length.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mmarch/chunk.hpp"

namespace mmarch {

struct HoloVector {
    std::vector<double> values;

    HoloVector() = default;
    explicit HoloVector(std::size_t dim) : values(dim, 0.0) {}
    explicit HoloVector(std::vector<double> v) : values(std::move(v)) {}

    std::size_t dim() const { return values.size(); }

    double norm() const {
        double s = 0.0;
        for (double x : values)
            s += x * x;
        return std::sqrt(s);
    }

    bool is_zero() const {
        return std::all_of(values.begin(), values.end(), [](double x) { return x == 0.0; });
    }

    // Scaled to unit length; the zero vector stays zero.
    HoloVector normalized() const {
        double n = norm();
        HoloVector out(*this);
        if (n > 0.0)
            for (double& x : out.values)
                x /= n;
        return out;
    }

    void add_scaled(const HoloVector& other, double w) {
        if (other.dim() != dim())
            throw invalid_argument("dimension mismatch");
        for (std::size_t i = 0; i < values.size(); ++i)
            values[i] += w * other.values[i];
    }

    HoloVector operator-() const {
        HoloVector out(*this);
        for (double& x : out.values)
            x = -x;
        return out;
    }

    friend HoloVector operator+(HoloVector a, const HoloVector& b) {
        a.add_scaled(b, 1.0);
        return a;
    }

    bool operator==(const HoloVector&) const = default;
};

inline double dot(const HoloVector& a, const HoloVector& b) {
    if (a.dim() != b.dim())
        throw invalid_argument("dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        s += a.values[i] * b.values[i];
    return s;
}

// 0 when either side is the zero vector.
inline double cosine(const HoloVector& a, const HoloVector& b) {
    double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        return 0.0;
    return dot(a, b) / (na * nb);
}

using Spectrum = std::vector<std::complex<double>>;

namespace detail {

inline bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

// In-place DFT. Radix-2 for powers of two, direct evaluation otherwise.
inline void dft(Spectrum& a, bool inverse) {
    const std::size_t n = a.size();
    if (n <= 1)
        return;
    const double sign = inverse ? 1.0 : -1.0;
    if (is_pow2(n)) {
        for (std::size_t i = 1, j = 0; i < n; ++i) {
            std::size_t bit = n >> 1;
            for (; j & bit; bit >>= 1)
                j ^= bit;
            j ^= bit;
            if (i < j)
                std::swap(a[i], a[j]);
        }
        std::vector<std::complex<double>> roots(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k)
            roots[k] = std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                                           static_cast<double>(n));
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const std::size_t step = n / len;
            for (std::size_t i = 0; i < n; i += len) {
                for (std::size_t k = 0; k < len / 2; ++k) {
                    const std::complex<double> w = roots[k * step];
                    const auto u = a[i + k];
                    const auto v = a[i + k + len / 2] * w;
                    a[i + k] = u + v;
                    a[i + k + len / 2] = u - v;
                }
            }
        }
    } else {
        Spectrum out(n);
        for (std::size_t k = 0; k < n; ++k) {
            std::complex<double> s = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                const double ang = sign * 2.0 * std::numbers::pi *
                                   static_cast<double>((k * t) % n) / static_cast<double>(n);
                s += a[t] * std::polar(1.0, ang);
            }
            out[k] = s;
        }
        a = std::move(out);
    }
    if (inverse)
        for (auto& x : a)
            x /= static_cast<double>(n);
}

inline Spectrum forward(const HoloVector& v) {
    Spectrum s(v.values.begin(), v.values.end());
    dft(s, false);
    return s;
}

inline HoloVector inverse_real(Spectrum s) {
    dft(s, true);
    HoloVector out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        out.values[i] = s[i].real();
    return out;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Uniform in [0, 1) from the top 53 bits.
inline double unit_uniform(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

} // namespace detail

// Seeded, memoized symbol -> atom map. Lookups insert unknown symbols, so the
// map is guarded; returned references stay valid for the codebook's lifetime.
class Codebook {
public:
    explicit Codebook(std::size_t dimension = 1024, std::uint64_t seed = 0)
        : dim_(dimension), seed_(seed) {
        if (dimension == 0)
            throw invalid_argument("codebook dimension must be positive");
    }

    Codebook(const Codebook&) = delete;
    Codebook& operator=(const Codebook&) = delete;

    std::size_t dimension() const { return dim_; }
    std::uint64_t seed() const { return seed_; }

    const HoloVector& atom(const Symbol& s) const { return entry(s).vec; }
    const Spectrum& spectrum(const Symbol& s) const { return entry(s).spec; }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return atoms_.size();
    }

    std::vector<Symbol> symbols() const {
        std::lock_guard lock(mutex_);
        std::vector<Symbol> out;
        out.reserve(atoms_.size());
        for (const auto& [name, _] : atoms_)
            out.emplace_back(name);
        return out;
    }

    // Visits atoms in lexicographic symbol order.
    template <class F>
    void for_each_atom(F&& f) const {
        std::lock_guard lock(mutex_);
        for (const auto& [name, a] : atoms_)
            f(name, a.vec);
    }

private:
    struct Atom {
        HoloVector vec;
        Spectrum spec;
    };

    const Atom& entry(const Symbol& s) const {
        std::lock_guard lock(mutex_);
        auto it = atoms_.find(s.str());
        if (it == atoms_.end())
            it = atoms_.emplace(s.str(), generate(s.str())).first;
        return it->second;
    }

    // Random phases with Hermitian symmetry give a real, unit-norm vector
    // whose spectrum has unit magnitude everywhere.
    Atom generate(const std::string& name) const {
        std::mt19937_64 rng(detail::splitmix64(seed_ ^ detail::splitmix64(detail::fnv1a(name))));
        Spectrum spec(dim_);
        auto random_sign = [&] { return (rng() >> 63) ? 1.0 : -1.0; };
        spec[0] = random_sign();
        for (std::size_t k = 1; k < (dim_ + 1) / 2; ++k) {
            const double phase = 2.0 * std::numbers::pi * detail::unit_uniform(rng());
            spec[k] = std::polar(1.0, phase);
            spec[dim_ - k] = std::conj(spec[k]);
        }
        if (dim_ % 2 == 0)
            spec[dim_ / 2] = random_sign();
        HoloVector vec = detail::inverse_real(spec).normalized();
        return Atom{std::move(vec), std::move(spec)};
    }

    std::size_t dim_;
    std::uint64_t seed_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, Atom> atoms_;
};

// Circular convolution.
inline HoloVector bind(const HoloVector& a, const HoloVector& b) {
    if (a.dim() != b.dim())
        throw invalid_argument("dimension mismatch");
    Spectrum fa = detail::forward(a), fb = detail::forward(b);
    for (std::size_t i = 0; i < fa.size(); ++i)
        fa[i] *= fb[i];
    return detail::inverse_real(std::move(fa));
}

// Circular correlation: the approximate (for unitary keys, exact) inverse of bind.
inline HoloVector unbind(const HoloVector& trace, const HoloVector& key) {
    if (trace.dim() != key.dim())
        throw invalid_argument("dimension mismatch");
    Spectrum ft = detail::forward(trace), fk = detail::forward(key);
    for (std::size_t i = 0; i < ft.size(); ++i)
        ft[i] *= std::conj(fk[i]);
    return detail::inverse_real(std::move(ft));
}

// Unit-length superposition of isa (x) type and every slot (x) value.
inline HoloVector pack(const Chunk& c, const Codebook& book) {
    const Spectrum& isa = book.spectrum(Symbol(std::string(isa_slot)));
    const Spectrum& type = book.spectrum(c.ctype);
    Spectrum acc(book.dimension());
    for (std::size_t i = 0; i < acc.size(); ++i)
        acc[i] = isa[i] * type[i];
    for (const auto& [slot, value] : c.slots) {
        const Spectrum& r = book.spectrum(slot);
        const Spectrum& f = book.spectrum(value);
        for (std::size_t i = 0; i < acc.size(); ++i)
            acc[i] += r[i] * f[i];
    }
    return detail::inverse_real(std::move(acc)).normalized();
}

struct Cleanup {
    Symbol symbol;
    double similarity = 0.0;
};

inline constexpr double tie_epsilon = 1e-12;

// Nearest atom by cosine; near-ties go to the lexicographically smaller name.
inline Cleanup cleanup(const HoloVector& v, const Codebook& book) {
    if (v.dim() != book.dimension())
        throw invalid_argument("dimension mismatch");
    std::optional<Cleanup> best;
    const double n = v.norm();
    book.for_each_atom([&](const std::string& name, const HoloVector& atom) {
        const double sim = n == 0.0 ? 0.0 : dot(v, atom) / n;
        if (!best || sim > best->similarity + tie_epsilon)
            best = Cleanup{Symbol(name), sim};
    });
    if (!best)
        throw invalid_argument("cleanup against an empty codebook");
    return *best;
}

inline constexpr double default_cleanup_threshold = 0.2;

struct SlotReading {
    Symbol slot;
    Symbol best;                 // argmax atom regardless of threshold
    double similarity = 0.0;
    std::optional<Symbol> value; // set when similarity >= threshold
};

struct Unpacked {
    SlotReading type;            // reading of the isa role
    std::vector<SlotReading> slots;

    // The decoded chunk, present only when the type was recovered. Absent
    // slots are left out.
    std::optional<Chunk> chunk() const {
        if (!type.value)
            return std::nullopt;
        Chunk c{*type.value, {}, 0};
        for (const auto& r : slots)
            if (r.value)
                c.slots.emplace_back(r.slot, *r.value);
        return c;
    }
};

// Schema-directed decoding: the caller names the slots to look for.
inline Unpacked unpack(const HoloVector& v, std::span<const Symbol> slot_names, const Codebook& book,
                       double threshold = default_cleanup_threshold) {
    if (v.dim() != book.dimension())
        throw invalid_argument("dimension mismatch");
    const Spectrum fv = detail::forward(v);
    auto read = [&](const Symbol& role) {
        const Spectrum& key = book.spectrum(role);
        Spectrum s(fv.size());
        for (std::size_t i = 0; i < s.size(); ++i)
            s[i] = fv[i] * std::conj(key[i]);
        Cleanup c = cleanup(detail::inverse_real(std::move(s)), book);
        SlotReading r{role, c.symbol, c.similarity, std::nullopt};
        if (c.similarity >= threshold)
            r.value = c.symbol;
        return r;
    };
    Unpacked out;
    out.type = read(Symbol(std::string(isa_slot)));
    out.slots.reserve(slot_names.size());
    for (const auto& s : slot_names)
        out.slots.push_back(read(s));
    return out;
}

struct DecodedSymbol {
    Symbol symbol;
    double similarity = 0.0;
};

// Best filler per role, deduplicated, ranked by similarity (desc) then name.
// Used to hand small symbolic predictors a readable view of a context vector.
inline std::vector<DecodedSymbol> top_symbols(const HoloVector& v, std::span<const Symbol> roles,
                                              const Codebook& book, std::size_t k,
                                              double threshold = default_cleanup_threshold) {
    std::vector<DecodedSymbol> found;
    if (v.is_zero() || k == 0)
        return found;
    Unpacked u = unpack(v, roles, book, threshold);
    auto consider = [&](const SlotReading& r) {
        if (!r.value)
            return;
        for (auto& f : found) {
            if (f.symbol == *r.value) {
                f.similarity = std::max(f.similarity, r.similarity);
                return;
            }
        }
        found.push_back({*r.value, r.similarity});
    };
    consider(u.type);
    for (const auto& r : u.slots)
        consider(r);
    std::sort(found.begin(), found.end(), [](const DecodedSymbol& a, const DecodedSymbol& b) {
        if (a.similarity != b.similarity)
            return a.similarity > b.similarity;
        return a.symbol < b.symbol;
    });
    if (found.size() > k)
        found.resize(k);
    return found;
}

} // namespace mmarch
