#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "codesearch/corpus.hpp"
#include "codesearch/vocabulary.hpp"

namespace codesearch {

class EmbeddingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Raised by pooling operations when a bag contains no token known to the
// embedding matrix.
class NoKnownTokensError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Token-indexed table of d-dimensional vectors, row-major.
struct EmbeddingMatrix {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, std::size_t> index_of;
    std::size_t dim = 0;
    std::vector<double> data;

    std::size_t rows() const { return tokens.size(); }

    std::span<double> row(std::size_t i) {
        return {data.data() + i * dim, dim};
    }
    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * dim, dim};
    }

    // nullptr when the token has no row.
    const double* find_row(const std::string& token) const {
        auto it = index_of.find(token);
        return it == index_of.end() ? nullptr : data.data() + it->second * dim;
    }

    // Builds the token -> row lookup from `tokens`; call after filling rows.
    void rebuild_lookup();
};

struct SkipGramConfig {
    std::size_t dim = 100;
    std::size_t window = 5;
    std::size_t negatives = 5;
    std::size_t epochs = 5;
    double learning_rate = 0.025;
    std::uint64_t min_count = 2;
    std::uint64_t seed = 1;
};

// Context tokens at distance 1..window on either side of `position`,
// truncated at bag boundaries, in positional order.
std::vector<std::string> context_window(const TokenBag& bag, std::size_t position,
                                        std::size_t window);

// Normalized negative-sampling distribution over the vocabulary,
// proportional to frequency^power.
std::vector<double> negative_sampling_distribution(const Vocabulary& vocab,
                                                   double power = 0.75);

// Skip-gram with negative sampling over the corpus bags. Positives are
// (target, context) pairs within cfg.window; negatives are drawn from the
// frequency^0.75 unigram distribution; updates are plain SGD on the
// logistic loss with a linearly decaying rate. Single-threaded and
// bitwise deterministic for a fixed seed. Throws EmbeddingError when the
// corpus yields no training pairs.
EmbeddingMatrix train_skipgram(std::span<const TokenBag> corpus, const SkipGramConfig& cfg);

// Text vector format: header "<dim> <rows>", then one line per token:
// the token followed by dim decimal reals. Doubles are written with
// enough digits to round-trip exactly.
void save_embeddings(const EmbeddingMatrix& matrix, const std::string& path);
EmbeddingMatrix load_embeddings(const std::string& path);

}  // namespace codesearch
