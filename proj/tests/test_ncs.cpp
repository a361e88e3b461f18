#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "codesearch/kernels.hpp"
#include "codesearch/ncs.hpp"
#include "codesearch/rng.hpp"
#include "util.hpp"

using namespace codesearch;

namespace {

TokenBag bag(std::vector<std::string> tokens) {
    return TokenBag{std::move(tokens)};
}

// Matrix with caller-chosen rows.
EmbeddingMatrix make_matrix(std::vector<std::pair<std::string, std::vector<double>>> rows) {
    EmbeddingMatrix m;
    m.dim = rows.front().second.size();
    for (auto& [token, values] : rows) {
        REQUIRE(values.size() == m.dim);
        m.tokens.push_back(token);
        m.data.insert(m.data.end(), values.begin(), values.end());
    }
    m.rebuild_lookup();
    return m;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = std::sqrt(kernels::squared_norm(a.data(), a.size()));
    const double nb = std::sqrt(kernels::squared_norm(b.data(), b.size()));
    return kernels::dot(a.data(), b.data(), a.size()) / (na * nb);
}

}  // namespace

TEST_CASE("idf weights by document frequency") {
    const std::vector<TokenBag> corpus = {bag({"a", "a", "b"}), bag({"b", "c"})};
    const IdfTable idf = compute_idf(corpus);
    CHECK(idf.corpus_size == 2);
    CHECK(idf.find("a") == doctest::Approx(std::log(2.0)));
    CHECK(idf.find("b") == doctest::Approx(0.0));
    CHECK(idf.find("c") == doctest::Approx(std::log(2.0)));
    CHECK(idf.find("unseen") == 0.0);

    // repeats inside one document count once
    CHECK(idf.values.at("a") == idf.values.at("c"));
    CHECK_THROWS_AS(compute_idf(std::vector<TokenBag>{}), NcsError);
}

TEST_CASE("idf matches a brute-force count on random corpora") {
    Rng rng(21);
    const std::vector<std::string> pool = {"t0", "t1", "t2", "t3", "t4",
                                           "t5", "t6", "t7", "t8", "t9"};
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t docs = 1 + rng.below(8);
        std::vector<TokenBag> corpus;
        for (std::size_t d = 0; d < docs; ++d) {
            TokenBag b;
            const std::size_t len = 1 + rng.below(6);
            for (std::size_t i = 0; i < len; ++i)
                b.tokens.push_back(pool[rng.below(pool.size())]);
            corpus.push_back(std::move(b));
        }

        const IdfTable idf = compute_idf(corpus);
        std::map<std::string, std::size_t> df;
        for (const TokenBag& b : corpus) {
            const std::set<std::string> unique(b.tokens.begin(), b.tokens.end());
            for (const std::string& t : unique) ++df[t];
        }
        CHECK(idf.values.size() == df.size());
        for (const auto& [token, count] : df) {
            CHECK(idf.find(token) ==
                  doctest::Approx(std::log(static_cast<double>(docs) / count)));
        }
    }
}

TEST_CASE("snippet pooling sums tf * idf * row over unique tokens") {
    const auto matrix = make_matrix({{"a", {1.0, 0.0}}, {"b", {0.0, 1.0}}});
    const std::vector<TokenBag> corpus = {bag({"a", "a", "b"}), bag({"b", "c"})};
    const IdfTable idf = compute_idf(corpus);

    const auto e = embed_code_ncs(bag({"a", "a", "b"}), matrix, idf);
    REQUIRE(e.size() == 2);
    CHECK(e[0] == doctest::Approx(2.0 * std::log(2.0)));
    CHECK(e[1] == doctest::Approx(0.0));  // idf("b") is 0

    // token order inside the bag is irrelevant
    const auto shuffled = embed_code_ncs(bag({"b", "a", "a"}), matrix, idf);
    CHECK(e == shuffled);

    // unknown tokens are skipped, not errors, as long as something contributes
    const auto with_unknown = embed_code_ncs(bag({"a", "zzz"}), matrix, idf);
    CHECK(with_unknown[0] == doctest::Approx(std::log(2.0)));
}

TEST_CASE("snippets with no usable token are rejected") {
    const auto matrix = make_matrix({{"a", {1.0, 0.0}}, {"b", {0.0, 1.0}}});
    const std::vector<TokenBag> corpus = {bag({"a", "a", "b"}), bag({"b", "c"})};
    const IdfTable idf = compute_idf(corpus);

    CHECK_THROWS_AS(embed_code_ncs(bag({"zzz"}), matrix, idf), AllTokensUnweightedError);
    // known token whose idf is exactly zero contributes nothing either
    CHECK_THROWS_AS(embed_code_ncs(bag({"b"}), matrix, idf), AllTokensUnweightedError);
}

TEST_CASE("query pooling averages known rows with multiplicity") {
    const auto matrix = make_matrix({{"a", {1.0, 0.0}}, {"b", {0.0, 1.0}}});

    const auto even = embed_query_ncs(bag({"a", "b"}), matrix);
    CHECK(even[0] == doctest::Approx(0.5));
    CHECK(even[1] == doctest::Approx(0.5));

    const auto weighted = embed_query_ncs(bag({"a", "a", "b"}), matrix);
    CHECK(weighted[0] == doctest::Approx(2.0 / 3.0));
    CHECK(weighted[1] == doctest::Approx(1.0 / 3.0));

    // unknown tokens do not dilute the mean
    const auto diluted = embed_query_ncs(bag({"a", "a", "b", "zzz", "zzz"}), matrix);
    CHECK(diluted == weighted);

    CHECK_THROWS_AS(embed_query_ncs(bag({"zzz"}), matrix), NoKnownTokensError);
}

TEST_CASE("ranking is invariant to uniform scaling of the embedding space") {
    Rng rng(22);
    EmbeddingMatrix m;
    m.dim = 6;
    for (const char* t : {"a", "b", "c", "d", "e"}) {
        m.tokens.push_back(t);
        for (std::size_t i = 0; i < m.dim; ++i) m.data.push_back(rng.uniform(-1.0, 1.0));
    }
    m.rebuild_lookup();
    EmbeddingMatrix scaled = m;
    for (double& v : scaled.data) v *= 3.5;

    const std::vector<TokenBag> corpus = {bag({"a", "b"}), bag({"c", "d"}), bag({"e", "a"}),
                                          bag({"b", "c", "e"})};
    const IdfTable idf = compute_idf(corpus);
    const TokenBag query = bag({"a", "c"});
    const auto q1 = embed_query_ncs(query, m);
    const auto q2 = embed_query_ncs(query, scaled);
    for (const TokenBag& doc : corpus) {
        const auto d1 = embed_code_ncs(doc, m, idf);
        const auto d2 = embed_code_ncs(doc, scaled, idf);
        CHECK(cosine(q1, d1) == doctest::Approx(cosine(q2, d2)).epsilon(1e-12));
    }
}

TEST_CASE("embedder interface returns nullopt instead of throwing") {
    const auto matrix = make_matrix({{"a", {1.0, 0.0}}, {"b", {0.0, 1.0}}});
    const std::vector<TokenBag> corpus = {bag({"a", "a", "b"}), bag({"b", "c"})};
    NcsEmbedder embedder(matrix, compute_idf(corpus));

    CHECK(embedder.dim() == 2);
    REQUIRE(embedder.embed_code(bag({"a"})).has_value());
    CHECK_FALSE(embedder.embed_code(bag({"zzz"})).has_value());
    CHECK_FALSE(embedder.embed_code(bag({"b"})).has_value());
    REQUIRE(embedder.embed_query(bag({"b"})).has_value());
    CHECK_FALSE(embedder.embed_query(bag({"zzz"})).has_value());

    const auto direct = embed_code_ncs(bag({"a", "b"}), matrix, embedder.idf());
    CHECK(*embedder.embed_code(bag({"a", "b"})) == direct);
}

TEST_CASE("idf table survives a save/load round trip") {
    std::vector<TokenBag> corpus;
    Rng rng(23);
    const std::vector<std::string> pool = {"alpha", "beta", "gamma", "delta", "epsilon"};
    for (int d = 0; d < 7; ++d) {
        TokenBag b;
        const std::size_t len = 1 + rng.below(4);
        for (std::size_t i = 0; i < len; ++i) b.tokens.push_back(pool[rng.below(pool.size())]);
        corpus.push_back(std::move(b));
    }
    const IdfTable table = compute_idf(corpus);

    testutil::TempDir dir("ncs");
    const std::string path = dir.file("idf.jsonl");
    save_idf(table, path);
    const IdfTable loaded = load_idf(path);
    CHECK(loaded.corpus_size == table.corpus_size);
    REQUIRE(loaded.values.size() == table.values.size());
    for (const auto& [token, value] : table.values) CHECK(loaded.find(token) == value);
}

TEST_CASE("idf file validation") {
    testutil::TempDir dir("ncs");
    const std::string path = dir.file("idf.jsonl");
    auto write = [&](const std::string& content) {
        std::ofstream out(path);
        out << content;
    };

    SUBCASE("missing header") {
        write("{\"token\":\"a\",\"idf\":0.5}\n");
        CHECK_THROWS_AS(load_idf(path), NcsError);
    }
    SUBCASE("negative idf") {
        write("{\"N\":2}\n{\"token\":\"a\",\"idf\":-0.5}\n");
        CHECK_THROWS_AS(load_idf(path), NcsError);
    }
    SUBCASE("duplicate token") {
        write("{\"N\":2}\n{\"token\":\"a\",\"idf\":0.5}\n{\"token\":\"a\",\"idf\":0.5}\n");
        CHECK_THROWS_AS(load_idf(path), NcsError);
    }
    SUBCASE("invalid json") {
        write("{\"N\":2}\n{nope\n");
        CHECK_THROWS_AS(load_idf(path), NcsError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_idf(dir.file("absent.jsonl")), NcsError);
    }
}
