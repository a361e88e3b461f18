#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "codesearch/corpus.hpp"
#include "codesearch/embedder.hpp"
#include "codesearch/embedding.hpp"

namespace codesearch {

class NcsError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Every token of the bag is either unknown to the matrix or carries zero
// TF-IDF weight, so the pooled vector would be degenerate.
class AllTokensUnweightedError : public NcsError {
  public:
    using NcsError::NcsError;
};

struct IdfTable {
    std::size_t corpus_size = 0;
    std::unordered_map<std::string, double> values;

    // Tokens never seen in the corpus weigh nothing.
    double find(const std::string& token) const {
        auto it = values.find(token);
        return it == values.end() ? 0.0 : it->second;
    }
};

IdfTable compute_idf(std::span<const TokenBag> corpus);

void save_idf(const IdfTable& table, const std::string& path);
IdfTable load_idf(const std::string& path);

// TF-IDF-weighted sum over the bag's unique tokens.
// Throws AllTokensUnweightedError when nothing contributes.
std::vector<double> embed_code_ncs(const TokenBag& code, const EmbeddingMatrix& matrix,
                                   const IdfTable& idf);

// Mean of the known token embeddings, multiplicity respected.
// Throws NoKnownTokensError when the matrix covers none of the bag.
std::vector<double> embed_query_ncs(const TokenBag& query, const EmbeddingMatrix& matrix);

class NcsEmbedder : public Embedder {
  public:
    NcsEmbedder(EmbeddingMatrix matrix, IdfTable idf)
        : matrix_(std::move(matrix)), idf_(std::move(idf)) {}

    std::size_t dim() const override { return matrix_.dim; }
    std::optional<std::vector<double>> embed_code(const TokenBag& code) const override;
    std::optional<std::vector<double>> embed_query(const TokenBag& query) const override;

    const EmbeddingMatrix& matrix() const { return matrix_; }
    const IdfTable& idf() const { return idf_; }

  private:
    EmbeddingMatrix matrix_;
    IdfTable idf_;
};

}  // namespace codesearch
