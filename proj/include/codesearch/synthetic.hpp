#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "codesearch/corpus.hpp"

namespace codesearch {

class SyntheticError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Planted-correspondence corpus: each concept owns one code-side and one
// query-side token, snippets draw distinct concepts plus noise tokens,
// and benchmark queries are held-out concept sets whose truth snippet is
// placed in the search corpus.
struct SyntheticConfig {
    std::size_t pairs = 500;
    std::size_t benchmark = 100;
    std::size_t search_size = 500;
    std::size_t concepts = 120;
    std::size_t concepts_per_snippet = 4;
    double noise_rate = 0.2;      // fraction of each snippet that is noise
    double vocab_overlap = 0.0;   // fraction of concepts sharing one token across sides
    std::size_t noise_vocab = 60; // per-side noise token pool
    std::uint64_t seed = 1;
};

struct SyntheticCorpus {
    std::vector<AlignedPair> aligned;
    std::vector<SearchDocument> search;
    std::vector<BenchmarkQuery> benchmark;
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg);

// Writes aligned.jsonl, search.jsonl, benchmark.jsonl under dir.
void write_synthetic(const SyntheticCorpus& corpus, const std::string& dir);

}  // namespace codesearch
