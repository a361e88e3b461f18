#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace codesearch {

class CorpusError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Multiset of normalized tokens for one code snippet or one query.
// Order is carried (the embedding pretrainer windows over it) but every
// pooling operation treats the bag as order-insensitive.
struct TokenBag {
    std::vector<std::string> tokens;

    bool empty() const { return tokens.empty(); }
    std::size_t size() const { return tokens.size(); }

    // Multiset equality.
    bool same_bag(const TokenBag& other) const;

    // Tokens of the bag in sorted order, duplicates kept. Pooling code
    // enumerates this to fix summation order.
    std::vector<std::string> sorted_tokens() const;

    // Canonical multiset key (sorted tokens joined with '\x1f').
    std::string bag_key() const;
};

// One (code, description) training example.
struct AlignedPair {
    std::string id;
    TokenBag code;
    TokenBag description;
    std::string raw_code;
    std::optional<std::string> source_url;
};

// One searchable snippet.
struct SearchDocument {
    std::string id;
    TokenBag code;
    std::string raw_code;
};

// One evaluation query with its ground-truth answer.
struct BenchmarkQuery {
    std::string id;
    std::string query_text;
    TokenBag query;
    std::string truth_raw;
    TokenBag truth;
};

// Splits on non-alphanumeric characters, camelCase transitions
// (lower->upper) and letter/digit boundaries, then lowercases.
// "getStackTrace" -> [get, stack, trace]. Empty input yields an
// empty bag. Byte-oriented: non-ASCII bytes act as separators.
TokenBag tokenize(const std::string& text);

// Heuristic filter for forum-derived (title, snippet) pairs: keep iff the
// snippet has no XML tags, the snippet contains '(', and the lowercased
// title mentions none of "gradle", "studio", "emulator".
bool filter_forum_pair(const std::string& title, const std::string& snippet);

// Keeps the first occurrence of each distinct token multiset, preserving
// first-occurrence order.
std::vector<SearchDocument> dedup(const std::vector<SearchDocument>& docs);

// JSON-lines loaders. Records may carry raw strings (tokenized on load)
// or pre-tokenized arrays (validated: each element must be a single
// normalized token). Malformed lines raise CorpusError naming the line.
std::vector<AlignedPair> load_aligned_corpus(const std::string& path);
std::vector<SearchDocument> load_search_corpus(const std::string& path);
std::vector<BenchmarkQuery> load_benchmark(const std::string& path);

}  // namespace codesearch
