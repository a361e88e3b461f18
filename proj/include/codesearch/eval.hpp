#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "codesearch/corpus.hpp"
#include "codesearch/embedder.hpp"
#include "codesearch/search_index.hpp"

namespace codesearch {

class EvalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Containment of the truth's unique tokens in the candidate's.
double snippet_similarity(const TokenBag& candidate, const TokenBag& truth);

struct RetrievedSnippet {
    std::string id;
    TokenBag code;
};

struct Judgment {
    std::string query_id;
    std::optional<std::size_t> first_hit_rank;  // 1-based
    std::vector<double> similarities;           // per retrieved result
    bool embedding_failed = false;              // query had no representable token
};

Judgment judge(std::span<const RetrievedSnippet> results, const TokenBag& truth,
               double threshold);

std::size_t answered_at_k(std::span<const Judgment> judgments, std::size_t k);

// Mean reciprocal first-hit rank, zero for unanswered queries.
double mrr(std::span<const Judgment> judgments);

struct LabeledPair {
    TokenBag candidate;
    TokenBag truth;
    bool relevant = false;
};

// Mean similarity over the relevant-labeled pairs.
double calibrate_threshold(std::span<const LabeledPair> labeled);

struct EvalReport {
    std::size_t answered_at_1 = 0;
    std::size_t answered_at_5 = 0;
    std::size_t answered_at_10 = 0;
    double mean_reciprocal_rank = 0.0;
    double threshold = 0.0;
    std::size_t query_count = 0;
    std::size_t skipped_documents = 0;  // search docs the model could not embed
    std::vector<Judgment> judgments;
};

// Embeds the search corpus, builds the index, retrieves top k_max per
// benchmark query, and judges against the ground truth. Queries the
// model cannot embed count as unanswered.
EvalReport run_pipeline(const Embedder& model, std::span<const SearchDocument> corpus,
                        std::span<const BenchmarkQuery> benchmark, std::size_t k_max,
                        double threshold);

// Index construction shared by run_pipeline and the index subcommand.
// Documents the model cannot embed are dropped; skipped reports how many.
SearchIndex build_index_from_corpus(const Embedder& model,
                                    std::span<const SearchDocument> corpus,
                                    std::size_t* skipped = nullptr);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

}  // namespace codesearch
