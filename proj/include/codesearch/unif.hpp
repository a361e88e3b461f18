#pragma once

#include <cstdint>
#include <stdexcept>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "codesearch/corpus.hpp"
#include "codesearch/embedder.hpp"
#include "codesearch/embedding.hpp"
#include "codesearch/rng.hpp"

namespace codesearch {

class UnifError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct UnifTrainConfig {
    std::size_t epochs = 4000;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    double margin = 0.05;
    std::size_t negatives_per_positive = 1;
    std::uint64_t seed = 1;
};

// Dual embedding matrices plus the learned code-side attention vector.
struct UnifParameters {
    EmbeddingMatrix code_embeddings;   // T_c
    EmbeddingMatrix query_embeddings;  // T_q
    std::vector<double> attention;     // a_c

    std::size_t dim() const { return attention.size(); }
};

// Copies the pretrained rows into per-side matrices: code-bag tokens
// into T_c, description tokens into T_q (shared tokens start equal).
// The attention vector draws uniform entries in [-1/sqrt(d), 1/sqrt(d)].
UnifParameters init_unif(const EmbeddingMatrix& pretrained,
                         std::span<const AlignedPair> corpus, std::uint64_t seed);

struct AttentionPooled {
    std::vector<double> pooled;
    std::vector<double> weights;
};

// Softmax-weighted sum: alpha_i proportional to exp(a_c . emb_i),
// computed with max-subtraction.
AttentionPooled attention_pool(std::span<const std::span<const double>> embs,
                               std::span<const double> a_c);

// Attention pooling over the snippet's known tokens, each occurrence
// contributing its own weight. Throws NoKnownTokensError.
std::vector<double> embed_code_unif(const TokenBag& code, const UnifParameters& params);

// Mean of known T_q rows, multiplicity respected. Throws NoKnownTokensError.
std::vector<double> embed_query_unif(const TokenBag& query, const UnifParameters& params);

struct UnifGradients {
    std::map<std::size_t, std::vector<double>> code_rows;   // row index -> d-vector
    std::map<std::size_t, std::vector<double>> query_rows;  // row index -> d-vector
    std::vector<double> attention;
};

struct UnifLoss {
    double loss = 0.0;
    UnifGradients gradients;
};

// Mean cosine hinge over (pair, in-batch negative) terms with the exact
// analytic gradients. The rng drives negative sampling only.
UnifLoss unif_loss(std::span<const AlignedPair> batch, const UnifParameters& params,
                   const UnifTrainConfig& cfg, Rng& rng);

struct UnifTrainResult {
    UnifParameters params;
    std::vector<double> loss_history;  // per-epoch mean hinge loss
};

// Plain SGD over seeded shuffled batches. Pairs the parameters cannot
// embed on either side are dropped up front; at least two must remain.
UnifTrainResult train_unif(std::span<const AlignedPair> corpus, UnifParameters params,
                           const UnifTrainConfig& cfg);

// Bundle directory layout: tc.vec, tq.vec, unif.json.
void save_unif(const UnifParameters& params, const UnifTrainConfig& cfg,
               std::span<const double> loss_history, const std::string& dir);

struct UnifBundle {
    UnifParameters params;
    UnifTrainConfig config;
    std::vector<double> loss_history;
};

UnifBundle load_unif(const std::string& dir);

class UnifEmbedder : public Embedder {
  public:
    explicit UnifEmbedder(UnifParameters params) : params_(std::move(params)) {}

    std::size_t dim() const override { return params_.dim(); }
    std::optional<std::vector<double>> embed_code(const TokenBag& code) const override;
    std::optional<std::vector<double>> embed_query(const TokenBag& query) const override;

    const UnifParameters& params() const { return params_; }

  private:
    UnifParameters params_;
};

}  // namespace codesearch
