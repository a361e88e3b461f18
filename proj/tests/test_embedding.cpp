#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "codesearch/embedding.hpp"
#include "codesearch/kernels.hpp"
#include "codesearch/vocabulary.hpp"
#include "util.hpp"

using namespace codesearch;

namespace {

TokenBag bag(std::vector<std::string> tokens) {
    return TokenBag{std::move(tokens)};
}

double cosine(const EmbeddingMatrix& m, const std::string& a, const std::string& b) {
    const double* x = m.find_row(a);
    const double* y = m.find_row(b);
    REQUIRE(x != nullptr);
    REQUIRE(y != nullptr);
    const double nx = std::sqrt(kernels::squared_norm(x, m.dim));
    const double ny = std::sqrt(kernels::squared_norm(y, m.dim));
    return kernels::dot(x, y, m.dim) / (nx * ny);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << content;
}

template <typename Fn>
std::string embedding_error(Fn&& fn) {
    try {
        fn();
    } catch (const EmbeddingError& e) {
        return e.what();
    }
    FAIL("expected EmbeddingError");
    return {};
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("vocabulary orders tokens by frequency then name") {
    const std::vector<TokenBag> corpus = {bag({"a", "b", "b", "c", "c"}), bag({"c", "d"})};
    const Vocabulary vocab = build_vocabulary(corpus, 1);
    CHECK(vocab.tokens == std::vector<std::string>{"c", "b", "a", "d"});
    CHECK(vocab.frequencies == std::vector<std::uint64_t>{3, 2, 1, 1});
    CHECK(vocab.find("c") == 0);
    CHECK(vocab.find("zzz") == static_cast<std::size_t>(-1));

    const Vocabulary cut = build_vocabulary(corpus, 2);
    CHECK(cut.tokens == std::vector<std::string>{"c", "b"});

    CHECK_THROWS_AS(build_vocabulary(corpus, 10), VocabularyError);
}

TEST_CASE("context window clips at bag boundaries") {
    const TokenBag b = bag({"a", "b", "c", "d", "e"});
    CHECK(context_window(b, 2, 2) == std::vector<std::string>{"a", "b", "d", "e"});
    CHECK(context_window(b, 0, 2) == std::vector<std::string>{"b", "c"});
    CHECK(context_window(b, 4, 2) == std::vector<std::string>{"c", "d"});
    CHECK(context_window(b, 2, 10) == std::vector<std::string>{"a", "b", "d", "e"});
    CHECK(context_window(b, 7, 2).empty());
    CHECK(context_window(bag({"solo"}), 0, 5).empty());
}

TEST_CASE("negative sampling distribution follows frequency^power") {
    std::vector<TokenBag> corpus;
    for (int i = 0; i < 4; ++i) corpus.push_back(bag({"a"}));
    for (int i = 0; i < 2; ++i) corpus.push_back(bag({"b"}));
    corpus.push_back(bag({"c"}));
    const Vocabulary vocab = build_vocabulary(corpus, 1);
    REQUIRE(vocab.tokens == std::vector<std::string>{"a", "b", "c"});

    const auto probs = negative_sampling_distribution(vocab);
    REQUIRE(probs.size() == 3);
    const double z = std::pow(4.0, 0.75) + std::pow(2.0, 0.75) + 1.0;
    CHECK(probs[0] == doctest::Approx(std::pow(4.0, 0.75) / z));
    CHECK(probs[1] == doctest::Approx(std::pow(2.0, 0.75) / z));
    CHECK(probs[2] == doctest::Approx(1.0 / z));
    CHECK(probs[0] + probs[1] + probs[2] == doctest::Approx(1.0));

    const auto plain = negative_sampling_distribution(vocab, 1.0);
    CHECK(plain[0] == doctest::Approx(4.0 / 7.0));
}

TEST_CASE("skip-gram training is bitwise deterministic per seed") {
    std::vector<TokenBag> corpus;
    for (int i = 0; i < 10; ++i) {
        corpus.push_back(bag({"read", "file", "path", "open"}));
        corpus.push_back(bag({"write", "file", "close"}));
    }
    SkipGramConfig cfg;
    cfg.dim = 8;
    cfg.window = 2;
    cfg.negatives = 3;
    cfg.epochs = 2;
    cfg.seed = 7;

    const EmbeddingMatrix a = train_skipgram(corpus, cfg);
    const EmbeddingMatrix b = train_skipgram(corpus, cfg);
    CHECK(a.tokens == b.tokens);
    CHECK(a.data == b.data);

    cfg.seed = 8;
    const EmbeddingMatrix c = train_skipgram(corpus, cfg);
    CHECK(a.data != c.data);
}

TEST_CASE("co-occurring tokens land closer than tokens that never meet") {
    // "x" and "y" share every document; "z" lives in a disjoint half
    // of the corpus, so negative sampling is all that ever pairs them.
    std::vector<TokenBag> corpus;
    const std::vector<std::string> left = {"m0", "m1", "m2", "m3", "m4", "m5"};
    const std::vector<std::string> right = {"n0", "n1", "n2", "n3", "n4", "n5"};
    for (std::size_t i = 0; i < 60; ++i) {
        corpus.push_back(bag({"x", "y", left[i % left.size()], left[(i + 1) % left.size()]}));
        corpus.push_back(bag({"z", right[i % right.size()], right[(i + 2) % right.size()]}));
    }
    SkipGramConfig cfg;
    cfg.dim = 16;
    cfg.window = 4;
    cfg.negatives = 5;
    cfg.epochs = 10;
    cfg.seed = 3;

    const EmbeddingMatrix m = train_skipgram(corpus, cfg);
    CHECK(cosine(m, "x", "y") > cosine(m, "x", "z"));
}

TEST_CASE("tokens cut by min_count get no row") {
    std::vector<TokenBag> corpus;
    for (int i = 0; i < 5; ++i) corpus.push_back(bag({"solid", "stable"}));
    corpus.push_back(bag({"solid", "rare"}));
    SkipGramConfig cfg;
    cfg.dim = 4;
    cfg.epochs = 1;
    cfg.min_count = 2;
    const EmbeddingMatrix m = train_skipgram(corpus, cfg);
    CHECK(m.find_row("solid") != nullptr);
    CHECK(m.find_row("stable") != nullptr);
    CHECK(m.find_row("rare") == nullptr);
}

TEST_CASE("degenerate corpora and configs are rejected") {
    const std::vector<TokenBag> singles = {bag({"a"}), bag({"a"}), bag({"a"})};
    SkipGramConfig cfg;
    cfg.dim = 4;
    cfg.min_count = 1;
    const std::string msg = embedding_error([&] { train_skipgram(singles, cfg); });
    CHECK(contains(msg, "no skip-gram training pairs"));

    const std::vector<TokenBag> corpus = {bag({"a", "b"}), bag({"a", "b"})};
    SkipGramConfig bad = cfg;
    bad.dim = 1;
    CHECK_THROWS_AS(train_skipgram(corpus, bad), EmbeddingError);
    bad = cfg;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(train_skipgram(corpus, bad), EmbeddingError);
    bad = cfg;
    bad.epochs = 0;
    CHECK_THROWS_AS(train_skipgram(corpus, bad), EmbeddingError);
}

TEST_CASE("embeddings survive a save/load round trip bit for bit") {
    std::vector<TokenBag> corpus;
    for (int i = 0; i < 8; ++i) corpus.push_back(bag({"alpha", "beta", "gamma"}));
    SkipGramConfig cfg;
    cfg.dim = 5;
    cfg.epochs = 2;
    cfg.min_count = 1;
    const EmbeddingMatrix trained = train_skipgram(corpus, cfg);

    testutil::TempDir dir("embed");
    const std::string path = dir.file("T.vec");
    save_embeddings(trained, path);
    const EmbeddingMatrix loaded = load_embeddings(path);
    CHECK(loaded.dim == trained.dim);
    CHECK(loaded.tokens == trained.tokens);
    CHECK(loaded.data == trained.data);
}

TEST_CASE("embedding file validation") {
    testutil::TempDir dir("embed");
    const std::string path = dir.file("T.vec");

    SUBCASE("missing file") {
        const std::string msg =
            embedding_error([&] { load_embeddings(dir.file("absent.vec")); });
        CHECK(contains(msg, "cannot open"));
    }
    SUBCASE("bad header") {
        write_file(path, "not a header\n");
        const std::string msg = embedding_error([&] { load_embeddings(path); });
        CHECK(contains(msg, "malformed header"));
    }
    SUBCASE("zero dimension") {
        write_file(path, "0 2\n");
        const std::string msg = embedding_error([&] { load_embeddings(path); });
        CHECK(contains(msg, "dimension must be positive"));
    }
    SUBCASE("missing rows") {
        write_file(path, "2 3\nfoo 0.5 0.25\nbar 1 2\n");
        const std::string msg = embedding_error([&] { load_embeddings(path); });
        CHECK(contains(msg, "expected 3 rows"));
    }
    SUBCASE("truncated row") {
        write_file(path, "3 1\nfoo 0.5 0.25\n");
        const std::string msg = embedding_error([&] { load_embeddings(path); });
        CHECK(contains(msg, "truncated row"));
        CHECK(contains(msg, "foo"));
    }
    SUBCASE("trailing content") {
        write_file(path, "2 1\nfoo 0.5 0.25\nbar 1 2\n");
        const std::string msg = embedding_error([&] { load_embeddings(path); });
        CHECK(contains(msg, "trailing content"));
    }
    SUBCASE("duplicate token") {
        write_file(path, "2 2\nfoo 0.5 0.25\nfoo 1 2\n");
        const std::string msg = embedding_error([&] { load_embeddings(path); });
        CHECK(contains(msg, "duplicate token"));
    }
}
