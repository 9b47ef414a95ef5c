#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace mmarch;
using testing_support::chunk;

namespace {

// Direct O(D^2) circular convolution / correlation.
std::vector<double> naive_convolve(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t d = a.size();
    std::vector<double> c(d, 0.0);
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t j = 0; j < d; ++j)
            c[k] += a[j] * b[(k + d - j) % d];
    return c;
}

std::vector<double> naive_correlate(const std::vector<double>& trace, const std::vector<double>& key) {
    const std::size_t d = trace.size();
    std::vector<double> c(d, 0.0);
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t j = 0; j < d; ++j)
            c[k] += key[j] * trace[(j + k) % d];
    return c;
}

} // namespace

// ---- symbols and chunks ---------------------------------------------------

TEST(Symbol, RejectsMalformedNames) {
    EXPECT_THROW(Symbol(""), mmarch::invalid_argument);
    EXPECT_THROW(Symbol("two words"), mmarch::invalid_argument);
    EXPECT_THROW(Symbol("a:b"), mmarch::invalid_argument);
    EXPECT_THROW(Symbol("?x"), mmarch::invalid_argument);
    EXPECT_NO_THROW(Symbol("retrieval-failure"));
}

TEST(Chunk, MakeChunkAssignsFreshIdsAndRejectsDuplicates) {
    ChunkIds ids;
    auto a = make_chunk(ids, "dog", {{"name", "Fido"}});
    auto b = make_chunk(ids, "dog", {{"name", "Fido"}});
    EXPECT_NE(a.id, b.id);
    EXPECT_TRUE(same_content(a, b));
    EXPECT_THROW(make_chunk(ids, "dog", {{"name", "Fido"}, {"name", "Rex"}}), mmarch::invalid_argument);
    EXPECT_THROW(make_chunk(ids, "dog", {{"name", "?"}}), mmarch::invalid_argument);
}

TEST(Chunk, SameContentIgnoresSlotOrder) {
    EXPECT_TRUE(same_content(chunk("dog", {{"a", "x"}, {"b", "y"}}), chunk("dog", {{"b", "y"}, {"a", "x"}})));
    EXPECT_FALSE(same_content(chunk("dog", {{"a", "x"}}), chunk("dog", {{"a", "x"}, {"b", "y"}})));
    EXPECT_FALSE(same_content(chunk("dog", {{"a", "x"}}), chunk("cat", {{"a", "x"}})));
}

TEST(Chunk, TextForm) {
    EXPECT_EQ(to_string(chunk("dog", {{"name", "Fido"}, {"breed", "labrador"}})), "{isa:dog name:Fido breed:labrador}");
    EXPECT_EQ(to_string(make_query("?", {{"name", "?n"}})), "{isa:? name:?n}");
}

// ---- matching --------------------------------------------------------------

TEST(MatchQuery, WildcardsBindUnderSlotName) {
    auto c = chunk("dog", {{"name", "Fido"}, {"breed", "labrador"}});
    auto b = match_query(make_query("dog", {{"name", "?"}}), c);
    ASSERT_TRUE(b);
    EXPECT_EQ(b->at("name").str(), "Fido");
    auto t = match_query(make_query("?", {{"breed", "labrador"}}), c);
    ASSERT_TRUE(t);
    EXPECT_EQ(t->at("isa").str(), "dog");
}

TEST(MatchQuery, MissingSlotOrMismatchFails) {
    auto c = chunk("dog", {{"name", "Fido"}});
    EXPECT_FALSE(match_query(make_query("dog", {{"breed", "?"}}), c));
    EXPECT_FALSE(match_query(make_query("dog", {{"name", "Rex"}}), c));
    EXPECT_FALSE(match_query(make_query("cat", {}), c));
}

TEST(MatchQuery, NamedVariablesMustAgree) {
    auto same = chunk("pair", {{"a", "x"}, {"b", "x"}});
    auto diff = chunk("pair", {{"a", "x"}, {"b", "y"}});
    auto q = make_query("pair", {{"a", "?v"}, {"b", "?v"}});
    EXPECT_TRUE(match_query(q, same));
    EXPECT_FALSE(match_query(q, diff));
    // bare wildcards never constrain each other
    EXPECT_TRUE(match_query(make_query("pair", {{"a", "?"}, {"b", "?"}}), diff));
}

TEST(MatchPattern, OnlyNamedVariablesBind) {
    auto c = chunk("dog", {{"name", "Fido"}});
    auto b = match_pattern(make_query("?", {{"name", "?n"}}), c);
    ASSERT_TRUE(b);
    EXPECT_EQ(b->size(), 1u);
    EXPECT_EQ(b->at("n").str(), "Fido");
}

TEST(Substitute, InstantiateAndComplete) {
    Bindings b{{"x", Symbol("Fido")}};
    auto q = substitute(make_query("dog", {{"name", "?x"}, {"breed", "?"}}), b);
    EXPECT_EQ(to_string(q), "{isa:dog name:Fido breed:?}");
    EXPECT_THROW(instantiate(q, b), model_error);
    EXPECT_THROW(instantiate(make_query("dog", {{"name", "?y"}}), b), model_error);
    auto filled = complete_query(q, *match_query(q, chunk("dog", {{"name", "Fido"}, {"breed", "pug"}})));
    EXPECT_EQ(to_string(filled), "{isa:dog name:Fido breed:pug}");
}

// Property: a chunk always matches its own exact query, and a query with every
// position replaced by a wildcard matches it too, binding each slot to its value.
TEST(MatchQuery, PropertyExactAndOpenQueries) {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 300; ++trial) {
        ChunkIds ids;
        std::vector<std::pair<Symbol, Symbol>> slots;
        const int n = static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i)
            slots.emplace_back(Symbol("s" + std::to_string(i)), Symbol("v" + std::to_string(rng() % 10)));
        Chunk c = make_chunk(ids, Symbol("t" + std::to_string(rng() % 3)), slots);
        EXPECT_TRUE(match_query(exact_query(c), c));
        Query open{Var{}, {}};
        for (const auto& [k, _] : c.slots)
            open.slots.emplace_back(k, Var{});
        auto b = match_query(open, c);
        ASSERT_TRUE(b);
        for (const auto& [k, v] : c.slots)
            EXPECT_EQ(b->at(k.str()), v);
        EXPECT_TRUE(same_content(complete_query(open, *b), c));
    }
}

TEST(Json, ChunkAndQueryRoundTrip) {
    auto c = chunk("dog", {{"name", "Fido"}});
    EXPECT_EQ(chunk_from_json(chunk_to_json(c)), c);
    auto q = make_query("?t", {{"name", "?"}, {"owner", "?o"}});
    EXPECT_EQ(query_from_json(query_to_json(q)), q);
    EXPECT_THROW(chunk_from_json(query_to_json(q)), mmarch::invalid_argument);
    EXPECT_THROW(query_from_json(json::parse(R"({"isa":"x","slots":{"isa":"y"}})")), mmarch::invalid_argument);
}

// ---- holographic codec ------------------------------------------------------

TEST(Fourier, MatchesNaiveConvolutionOnSeveralSizes) {
    std::mt19937_64 rng(7);
    for (std::size_t d : {1u, 2u, 5u, 8u, 12u, 16u, 64u, 100u}) {
        auto a = testing_support::random_vector(rng, d);
        auto b = testing_support::random_vector(rng, d);
        auto fast = bind(a, b).values;
        auto slow = naive_convolve(a.values, b.values);
        for (std::size_t i = 0; i < d; ++i)
            EXPECT_NEAR(fast[i], slow[i], 1e-9) << "d=" << d;
        auto fu = unbind(a, b).values;
        auto su = naive_correlate(a.values, b.values);
        for (std::size_t i = 0; i < d; ++i)
            EXPECT_NEAR(fu[i], su[i], 1e-9) << "d=" << d;
    }
}

TEST(Codebook, AtomsAreDeterministicUnitNorm) {
    Codebook a(1024, 9), b(1024, 9), c(1024, 10);
    for (const char* s : {"dog", "cat", "isa", "x"}) {
        EXPECT_NEAR(a.atom(Symbol(s)).norm(), 1.0, 1e-9);
        EXPECT_EQ(a.atom(Symbol(s)), b.atom(Symbol(s)));
        EXPECT_NE(a.atom(Symbol(s)), c.atom(Symbol(s)));
    }
    // Memoized: order of first use does not matter.
    Codebook d(1024, 9);
    d.atom(Symbol("x"));
    EXPECT_EQ(d.atom(Symbol("dog")), a.atom(Symbol("dog")));
    EXPECT_EQ(a.size(), 4u);
}

TEST(Codebook, DistinctAtomsAreNearlyOrthogonal) {
    Codebook book(1024, 1);
    double worst = 0.0;
    for (int i = 0; i < 40; ++i)
        for (int j = i + 1; j < 40; ++j)
            worst = std::max(worst, std::abs(cosine(book.atom(Symbol("a" + std::to_string(i))),
                                                    book.atom(Symbol("a" + std::to_string(j))))));
    EXPECT_LT(worst, 0.2);
}

TEST(Codec, UnbindInvertsBindForAtoms) {
    Codebook book(1024, 3);
    const auto& a = book.atom(Symbol("role"));
    const auto& b = book.atom(Symbol("filler"));
    EXPECT_GT(cosine(unbind(bind(a, b), a), b), 0.999);
}

TEST(Codec, CosineOfZeroVectorIsZero) {
    HoloVector z(16), v(16);
    v.values[3] = 1.0;
    EXPECT_EQ(cosine(z, v), 0.0);
    EXPECT_TRUE(z.normalized().is_zero());
}

TEST(Codec, PackUnpackRecoversChunk) {
    Codebook book(1024, 5);
    auto c = chunk("dog", {{"name", "Fido"}, {"breed", "labrador"}, {"colour", "black"}});
    auto v = pack(c, book);
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    std::vector<Symbol> slots{Symbol("name"), Symbol("breed"), Symbol("colour"), Symbol("owner")};
    auto u = unpack(v, slots, book);
    ASSERT_TRUE(u.chunk());
    EXPECT_TRUE(same_content(*u.chunk(), c));
    EXPECT_FALSE(u.slots[3].value); // absent slot stays below threshold
}

TEST(Codec, CleanupTiesGoToSmallerName) {
    Codebook book(64, 2);
    book.atom(Symbol("beta"));
    const auto& a = book.atom(Symbol("alpha"));
    book.atom(Symbol("gamma"));
    EXPECT_EQ(cleanup(a, book).symbol.str(), "alpha");
    // every similarity to the zero vector is 0: a pure tie
    EXPECT_EQ(cleanup(HoloVector(64), book).symbol.str(), "alpha");
    Codebook empty(64, 2);
    EXPECT_THROW(cleanup(a, empty), mmarch::invalid_argument);
}

TEST(Codec, TopSymbolsRanksAndDeduplicates) {
    Codebook book(1024, 8);
    auto v = pack(chunk("word", {{"value", "cat"}, {"after", "the"}}), book);
    std::vector<Symbol> roles{Symbol("after"), Symbol("value")};
    auto top = top_symbols(v, roles, book, 5);
    ASSERT_EQ(top.size(), 3u);
    for (std::size_t i = 1; i < top.size(); ++i)
        EXPECT_GE(top[i - 1].similarity, top[i].similarity);
    EXPECT_TRUE(top_symbols(HoloVector(1024), roles, book, 5).empty());
}

// Calibration oracle: brute-force round trip over random chunks drawn from a
// 100-symbol vocabulary with up to 8 slots at D = 1024.
TEST(Codec, CalibrationRoundTripAccuracy) {
    Codebook book(1024, 2024);
    std::mt19937_64 rng(99);
    std::vector<Symbol> vocab, slot_names;
    for (int i = 0; i < 100; ++i)
        vocab.emplace_back("w" + std::to_string(i));
    for (int i = 0; i < 8; ++i)
        slot_names.emplace_back("slot" + std::to_string(i));
    int exact = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        Chunk c{vocab[rng() % 100], {}, 0};
        const std::size_t n = rng() % 9;
        for (std::size_t s = 0; s < n; ++s)
            c.slots.emplace_back(slot_names[s], vocab[rng() % 100]);
        std::vector<Symbol> wanted(slot_names.begin(), slot_names.begin() + static_cast<std::ptrdiff_t>(n));
        auto u = unpack(pack(c, book), wanted, book);
        exact += u.chunk() && same_content(*u.chunk(), c);
    }
    const double accuracy = static_cast<double>(exact) / trials;
    // Pinned from the first correct run.
    EXPECT_DOUBLE_EQ(accuracy, 1.0);
    EXPECT_GE(accuracy, 0.99);
}
