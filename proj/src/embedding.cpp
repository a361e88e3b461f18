#include "codesearch/embedding.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "codesearch/kernels.hpp"
#include "codesearch/rng.hpp"

namespace codesearch {

void EmbeddingMatrix::rebuild_lookup() {
    index_of.clear();
    index_of.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (!index_of.emplace(tokens[i], i).second)
            throw EmbeddingError("duplicate token in embedding matrix: " + tokens[i]);
}

std::vector<std::string> context_window(const TokenBag& bag, std::size_t position,
                                        std::size_t window) {
    std::vector<std::string> context;
    if (position >= bag.size()) return context;
    const std::size_t lo = position >= window ? position - window : 0;
    const std::size_t hi = std::min(bag.size() - 1, position + window);
    for (std::size_t i = lo; i <= hi; ++i)
        if (i != position) context.push_back(bag.tokens[i]);
    return context;
}

std::vector<double> negative_sampling_distribution(const Vocabulary& vocab, double power) {
    std::vector<double> probs(vocab.size());
    double total = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        probs[i] = std::pow(static_cast<double>(vocab.frequencies[i]), power);
        total += probs[i];
    }
    for (double& p : probs) p /= total;
    return probs;
}

namespace {

// Vose alias method; O(1) draws from a fixed discrete distribution.
class AliasSampler {
  public:
    explicit AliasSampler(const std::vector<double>& probs)
        : prob_(probs.size()), alias_(probs.size()) {
        const std::size_t n = probs.size();
        std::vector<double> scaled(n);
        std::vector<std::size_t> small, large;
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = probs[i] * static_cast<double>(n);
            (scaled[i] < 1.0 ? small : large).push_back(i);
        }
        while (!small.empty() && !large.empty()) {
            const std::size_t s = small.back();
            const std::size_t l = large.back();
            small.pop_back();
            prob_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (std::size_t i : large) prob_[i] = 1.0, alias_[i] = i;
        for (std::size_t i : small) prob_[i] = 1.0, alias_[i] = i;
    }

    std::size_t sample(Rng& rng) const {
        const std::size_t i = static_cast<std::size_t>(rng.below(prob_.size()));
        return rng.uniform() < prob_[i] ? i : alias_[i];
    }

  private:
    std::vector<double> prob_;
    std::vector<std::size_t> alias_;
};

double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

void validate_config(const SkipGramConfig& cfg) {
    if (cfg.dim < 2) throw EmbeddingError("skip-gram dim must be >= 2");
    if (cfg.window == 0) throw EmbeddingError("skip-gram window must be positive");
    if (cfg.negatives == 0) throw EmbeddingError("skip-gram negatives must be positive");
    if (cfg.epochs == 0) throw EmbeddingError("skip-gram epochs must be positive");
    if (!(cfg.learning_rate > 0.0)) throw EmbeddingError("skip-gram learning rate must be positive");
    if (cfg.min_count == 0) throw EmbeddingError("skip-gram min_count must be positive");
}

}  // namespace

EmbeddingMatrix train_skipgram(std::span<const TokenBag> corpus, const SkipGramConfig& cfg) {
    validate_config(cfg);
    const Vocabulary vocab = build_vocabulary(corpus, cfg.min_count);
    const std::size_t dim = cfg.dim;

    // Encode bags as row indices, dropping tokens cut by min_count.
    std::vector<std::vector<std::uint32_t>> docs;
    docs.reserve(corpus.size());
    std::size_t total_positions = 0;
    for (const TokenBag& bag : corpus) {
        std::vector<std::uint32_t> doc;
        doc.reserve(bag.size());
        for (const std::string& token : bag.tokens) {
            const std::size_t idx = vocab.find(token);
            if (idx != static_cast<std::size_t>(-1))
                doc.push_back(static_cast<std::uint32_t>(idx));
        }
        total_positions += doc.size();
        docs.push_back(std::move(doc));
    }
    std::size_t total_pairs = 0;
    for (const auto& doc : docs)
        for (std::size_t pos = 0; pos < doc.size(); ++pos) {
            const std::size_t lo = pos >= cfg.window ? pos - cfg.window : 0;
            const std::size_t hi = std::min(doc.size() - 1, pos + cfg.window);
            total_pairs += hi - lo;  // window positions minus the center
        }
    if (total_pairs == 0)
        throw EmbeddingError("corpus yields no skip-gram training pairs");

    Rng rng(cfg.seed);
    std::vector<double> input(vocab.size() * dim);
    std::vector<double> output(vocab.size() * dim, 0.0);
    for (double& v : input) v = (rng.uniform() - 0.5) / static_cast<double>(dim);

    const AliasSampler sampler(negative_sampling_distribution(vocab));
    std::vector<double> pending(dim);

    const double total_schedule =
        static_cast<double>(total_positions) * static_cast<double>(cfg.epochs);
    std::size_t processed = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& doc : docs) {
            for (std::size_t pos = 0; pos < doc.size(); ++pos) {
                const double progress =
                    static_cast<double>(processed) / total_schedule;
                const double lr = cfg.learning_rate * std::max(1e-4, 1.0 - progress);
                ++processed;

                const std::uint32_t target = doc[pos];
                double* target_row = input.data() + static_cast<std::size_t>(target) * dim;
                const std::size_t lo = pos >= cfg.window ? pos - cfg.window : 0;
                const std::size_t hi = std::min(doc.size() - 1, pos + cfg.window);
                for (std::size_t c = lo; c <= hi; ++c) {
                    if (c == pos) continue;
                    const std::uint32_t context = doc[c];
                    std::fill(pending.begin(), pending.end(), 0.0);
                    for (std::size_t k = 0; k <= cfg.negatives; ++k) {
                        std::uint32_t out;
                        double label;
                        if (k == 0) {
                            out = context;
                            label = 1.0;
                        } else {
                            out = static_cast<std::uint32_t>(sampler.sample(rng));
                            if (out == context) continue;
                            label = 0.0;
                        }
                        double* out_row = output.data() + static_cast<std::size_t>(out) * dim;
                        const double f = sigmoid(kernels::dot(target_row, out_row, dim));
                        const double g = (label - f) * lr;
                        kernels::axpy(g, out_row, pending.data(), dim);
                        kernels::axpy(g, target_row, out_row, dim);
                    }
                    kernels::axpy(1.0, pending.data(), target_row, dim);
                }
            }
        }
    }

    EmbeddingMatrix matrix;
    matrix.tokens = vocab.tokens;
    matrix.dim = dim;
    matrix.data = std::move(input);
    matrix.rebuild_lookup();
    return matrix;
}

void save_embeddings(const EmbeddingMatrix& matrix, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw EmbeddingError("cannot open embedding file for writing: " + path);
    out << matrix.dim << ' ' << matrix.rows() << '\n';
    char buffer[64];
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        out << matrix.tokens[i];
        const auto row = matrix.row(i);
        for (double v : row) {
            std::snprintf(buffer, sizeof(buffer), " %.17g", v);
            out << buffer;
        }
        out << '\n';
    }
    if (!out) throw EmbeddingError("failed writing embedding file: " + path);
}

EmbeddingMatrix load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw EmbeddingError("cannot open embedding file: " + path);
    std::size_t dim = 0, rows = 0;
    if (!(in >> dim >> rows))
        throw EmbeddingError(path + ": malformed header, expected \"<dim> <rows>\"");
    if (dim == 0) throw EmbeddingError(path + ": dimension must be positive");

    EmbeddingMatrix matrix;
    matrix.dim = dim;
    matrix.tokens.reserve(rows);
    matrix.data.reserve(rows * dim);
    for (std::size_t r = 0; r < rows; ++r) {
        std::string token;
        if (!(in >> token))
            throw EmbeddingError(path + ": expected " + std::to_string(rows) +
                                 " rows, found " + std::to_string(r));
        matrix.tokens.push_back(token);
        for (std::size_t c = 0; c < dim; ++c) {
            double v;
            if (!(in >> v))
                throw EmbeddingError(path + ": truncated row for token \"" + token + "\"");
            if (!std::isfinite(v))
                throw EmbeddingError(path + ": non-finite entry for token \"" + token + "\"");
            matrix.data.push_back(v);
        }
    }
    std::string extra;
    if (in >> extra)
        throw EmbeddingError(path + ": trailing content after " + std::to_string(rows) + " rows");
    matrix.rebuild_lookup();
    return matrix;
}

}  // namespace codesearch
