#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include "codesearch/corpus.hpp"
#include "util.hpp"

using namespace codesearch;

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << content;
}

template <typename Fn>
std::string corpus_error(Fn&& fn) {
    try {
        fn();
    } catch (const CorpusError& e) {
        return e.what();
    }
    FAIL("expected CorpusError");
    return {};
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("tokenizer splits identifiers into lowercase word pieces") {
    const std::string snippet =
        "for (Map.Entry<String, Integer> entry : map.entrySet()) System.out.println(entry);";
    const std::vector<std::string> expected = {
        "for", "map", "entry", "string", "integer", "entry", "map",
        "entry", "set", "system", "out", "println", "entry"};
    CHECK(tokenize(snippet).tokens == expected);
}

TEST_CASE("tokenizer boundary rules") {
    CHECK(tokenize("getStackTrace").tokens == std::vector<std::string>{"get", "stack", "trace"});
    // runs of capitals stay together: only a lower->upper transition splits
    CHECK(tokenize("XMLParser").tokens == std::vector<std::string>{"xmlparser"});
    CHECK(tokenize("base64Encode").tokens == std::vector<std::string>{"base", "64", "encode"});
    CHECK(tokenize("sha256").tokens == std::vector<std::string>{"sha", "256"});
    CHECK(tokenize("2fa").tokens == std::vector<std::string>{"2", "fa"});
    CHECK(tokenize("snake_case_name").tokens == std::vector<std::string>{"snake", "case", "name"});
    CHECK(tokenize("a-b--c").tokens == std::vector<std::string>{"a", "b", "c"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("!!! ??? ...").empty());
    // non-ascii bytes separate
    CHECK(tokenize("na\xc3\xafve").tokens == std::vector<std::string>{"na", "ve"});
}

TEST_CASE("tokenizer output is normalized") {
    const std::string inputs[] = {
        "HttpURLConnection conn = (HttpURLConnection) url.openConnection();",
        "byte[] buf = new byte[4096]; int len; while ((len = in.read(buf)) > 0)",
        "SELECT * FROM users WHERE id = ?",
    };
    for (const std::string& input : inputs) {
        for (const std::string& token : tokenize(input).tokens) {
            const TokenBag again = tokenize(token);
            REQUIRE(again.size() == 1);
            CHECK(again.tokens[0] == token);
        }
    }
}

TEST_CASE("token bags compare as multisets") {
    const TokenBag a{{"read", "file", "read"}};
    const TokenBag b{{"file", "read", "read"}};
    const TokenBag c{{"read", "file"}};
    CHECK(a.same_bag(b));
    CHECK_FALSE(a.same_bag(c));
    CHECK(a.bag_key() == b.bag_key());
    CHECK(a.bag_key() != c.bag_key());
    CHECK(a.sorted_tokens() == std::vector<std::string>{"file", "read", "read"});
}

TEST_CASE("forum pair filter") {
    CHECK(filter_forum_pair("How to read a file in java",
                            "Files.readAllLines(Paths.get(path))"));
    // markup in the snippet rejects it
    CHECK_FALSE(filter_forum_pair("How to center a view",
                                  "<LinearLayout android:id=\"x\"></LinearLayout>"));
    // snippets without a call are rejected
    CHECK_FALSE(filter_forum_pair("How to read a file", "int x = 5;"));
    // tooling questions are rejected by title keyword, case-insensitive
    CHECK_FALSE(filter_forum_pair("Android Studio build fails", "foo(bar)"));
    CHECK_FALSE(filter_forum_pair("GRADLE sync error", "foo(bar)"));
    CHECK_FALSE(filter_forum_pair("app slow on Emulator", "foo(bar)"));
    // a bare '<' comparison is not markup
    CHECK(filter_forum_pair("compare two ints", "if (a < b && b > c) swap(a, b);"));
}

TEST_CASE("dedup keeps the first of each distinct token multiset") {
    std::vector<SearchDocument> docs;
    docs.push_back({"s0", tokenize("read(file)"), "read(file)"});
    docs.push_back({"s1", tokenize("write(file)"), "write(file)"});
    docs.push_back({"s2", tokenize("file.read()"), "file.read()"});  // same multiset as s0
    docs.push_back({"s3", tokenize("read(file, file)"), "read(file, file)"});
    const auto unique = dedup(docs);
    REQUIRE(unique.size() == 3);
    CHECK(unique[0].id == "s0");
    CHECK(unique[1].id == "s1");
    CHECK(unique[2].id == "s3");
}

TEST_CASE("aligned corpus loader") {
    testutil::TempDir dir("corpus");
    const std::string path = dir.file("aligned.jsonl");

    SUBCASE("raw strings, token arrays and blank lines") {
        write_file(path,
                   "{\"id\":\"p0\",\"code\":\"openFile(path)\",\"nl\":\"open a file\"}\n"
                   "\n"
                   "   \t\n"
                   "{\"id\":\"p1\",\"code\":[\"close\",\"file\"],\"nl\":[\"close\",\"it\"],"
                   "\"url\":\"https://example.com/q/1\"}\n");
        const auto pairs = load_aligned_corpus(path);
        REQUIRE(pairs.size() == 2);
        CHECK(pairs[0].id == "p0");
        CHECK(pairs[0].code.tokens == std::vector<std::string>{"open", "file", "path"});
        CHECK(pairs[0].description.tokens == std::vector<std::string>{"open", "a", "file"});
        CHECK(pairs[0].raw_code == "openFile(path)");
        CHECK_FALSE(pairs[0].source_url.has_value());
        CHECK(pairs[1].code.tokens == std::vector<std::string>{"close", "file"});
        CHECK(pairs[1].raw_code == "close file");
        REQUIRE(pairs[1].source_url.has_value());
        CHECK(*pairs[1].source_url == "https://example.com/q/1");
    }

    SUBCASE("token arrays must hold normalized tokens") {
        write_file(path, "{\"id\":\"p0\",\"code\":[\"getFoo\"],\"nl\":\"x\"}\n");
        const std::string msg = corpus_error([&] { load_aligned_corpus(path); });
        CHECK(contains(msg, "getFoo"));
        CHECK(contains(msg, "not a normalized token"));
    }

    SUBCASE("missing field names the line") {
        write_file(path,
                   "{\"id\":\"p0\",\"code\":\"a(b)\",\"nl\":\"x\"}\n"
                   "{\"id\":\"p1\",\"code\":\"a(b)\"}\n");
        const std::string msg = corpus_error([&] { load_aligned_corpus(path); });
        CHECK(contains(msg, ":2:"));
        CHECK(contains(msg, "\"nl\""));
    }

    SUBCASE("malformed json names the line") {
        write_file(path, "{\"id\":\"p0\",\"code\":\"a(b)\",\"nl\":\"x\"}\n{oops\n");
        const std::string msg = corpus_error([&] { load_aligned_corpus(path); });
        CHECK(contains(msg, ":2:"));
        CHECK(contains(msg, "malformed JSON"));
    }

    SUBCASE("code must tokenize to something") {
        write_file(path, "{\"id\":\"p0\",\"code\":\"!!!\",\"nl\":\"x\"}\n");
        const std::string msg = corpus_error([&] { load_aligned_corpus(path); });
        CHECK(contains(msg, "empty bag"));
    }

    SUBCASE("missing file") {
        const std::string msg =
            corpus_error([&] { load_aligned_corpus(dir.file("absent.jsonl")); });
        CHECK(contains(msg, "cannot open"));
    }
}

TEST_CASE("search corpus loader") {
    testutil::TempDir dir("corpus");
    const std::string path = dir.file("search.jsonl");

    SUBCASE("happy path") {
        write_file(path,
                   "{\"id\":\"s0\",\"code\":\"readFully(in)\"}\n"
                   "{\"id\":\"s1\",\"code\":[\"write\",\"out\"]}\n");
        const auto docs = load_search_corpus(path);
        REQUIRE(docs.size() == 2);
        CHECK(docs[0].code.tokens == std::vector<std::string>{"read", "fully", "in"});
        CHECK(docs[1].raw_code == "write out");
    }

    SUBCASE("duplicate ids are rejected") {
        write_file(path,
                   "{\"id\":\"s0\",\"code\":\"a(b)\"}\n"
                   "{\"id\":\"s0\",\"code\":\"c(d)\"}\n");
        const std::string msg = corpus_error([&] { load_search_corpus(path); });
        CHECK(contains(msg, "duplicate document id"));
        CHECK(contains(msg, "s0"));
    }

    SUBCASE("records must be objects") {
        write_file(path, "[1,2,3]\n");
        const std::string msg = corpus_error([&] { load_search_corpus(path); });
        CHECK(contains(msg, "must be a JSON object"));
    }
}

TEST_CASE("benchmark loader") {
    testutil::TempDir dir("corpus");
    const std::string path = dir.file("benchmark.jsonl");

    SUBCASE("happy path") {
        write_file(path,
                   "{\"id\":\"b0\",\"query\":\"execute shell command\","
                   "\"truth_code\":\"Runtime.getRuntime().exec(cmd)\"}\n");
        const auto queries = load_benchmark(path);
        REQUIRE(queries.size() == 1);
        CHECK(queries[0].query_text == "execute shell command");
        CHECK(queries[0].query.tokens ==
              std::vector<std::string>{"execute", "shell", "command"});
        CHECK(queries[0].truth.tokens ==
              std::vector<std::string>{"runtime", "get", "runtime", "exec", "cmd"});
        CHECK(queries[0].truth_raw == "Runtime.getRuntime().exec(cmd)");
    }

    SUBCASE("empty truth is rejected, empty query is not") {
        write_file(path, "{\"id\":\"b0\",\"query\":\"find\",\"truth_code\":\"???\"}\n");
        const std::string msg = corpus_error([&] { load_benchmark(path); });
        CHECK(contains(msg, "truth_code"));

        // a query no tokenizer output survives is the retriever's problem, not the loader's
        write_file(path, "{\"id\":\"b0\",\"query\":\"???\",\"truth_code\":\"a(b)\"}\n");
        const auto queries = load_benchmark(path);
        REQUIRE(queries.size() == 1);
        CHECK(queries[0].query.empty());
    }

    SUBCASE("duplicate ids are rejected") {
        write_file(path,
                   "{\"id\":\"b0\",\"query\":\"x\",\"truth_code\":\"a(b)\"}\n"
                   "{\"id\":\"b0\",\"query\":\"y\",\"truth_code\":\"c(d)\"}\n");
        const std::string msg = corpus_error([&] { load_benchmark(path); });
        CHECK(contains(msg, "duplicate query id"));
    }
}
