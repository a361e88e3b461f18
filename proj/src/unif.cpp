#include "codesearch/unif.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "codesearch/kernels.hpp"

namespace codesearch {

namespace {

constexpr double kNormFloor = 1e-12;

void validate_train_config(const UnifTrainConfig& cfg) {
    if (cfg.batch_size < 2) throw UnifError("batch_size must be >= 2");
    if (!(cfg.learning_rate > 0.0)) throw UnifError("learning_rate must be positive");
    if (!(cfg.margin >= 0.0)) throw UnifError("margin must be >= 0");
    if (cfg.negatives_per_positive == 0) throw UnifError("negatives_per_positive must be >= 1");
}

// Occurrence list of matrix row indices, enumerated in sorted token
// order so pooling never depends on the original token order.
std::vector<std::size_t> known_row_occurrences(const TokenBag& bag, const EmbeddingMatrix& m) {
    std::vector<std::string> sorted = bag.tokens;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> rows;
    rows.reserve(sorted.size());
    for (const std::string& token : sorted) {
        auto it = m.index_of.find(token);
        if (it != m.index_of.end()) rows.push_back(it->second);
    }
    return rows;
}

}  // namespace

UnifParameters init_unif(const EmbeddingMatrix& pretrained,
                         std::span<const AlignedPair> corpus, std::uint64_t seed) {
    if (pretrained.dim == 0 || pretrained.rows() == 0)
        throw UnifError("pretrained embedding matrix is empty");

    std::set<std::string> code_vocab, query_vocab;
    for (const AlignedPair& pair : corpus) {
        for (const std::string& t : pair.code.tokens)
            if (pretrained.find_row(t)) code_vocab.insert(t);
        for (const std::string& t : pair.description.tokens)
            if (pretrained.find_row(t)) query_vocab.insert(t);
    }
    if (code_vocab.empty())
        throw UnifError("pretrained matrix covers no code token of the corpus");
    if (query_vocab.empty())
        throw UnifError("pretrained matrix covers no description token of the corpus");

    auto copy_rows = [&](const std::set<std::string>& vocab) {
        EmbeddingMatrix m;
        m.dim = pretrained.dim;
        m.tokens.assign(vocab.begin(), vocab.end());
        m.data.reserve(m.tokens.size() * m.dim);
        for (const std::string& t : m.tokens) {
            const double* row = pretrained.find_row(t);
            m.data.insert(m.data.end(), row, row + m.dim);
        }
        m.rebuild_lookup();
        return m;
    };

    UnifParameters params;
    params.code_embeddings = copy_rows(code_vocab);
    params.query_embeddings = copy_rows(query_vocab);

    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(pretrained.dim));
    params.attention.resize(pretrained.dim);
    for (double& v : params.attention) v = rng.uniform(-bound, bound);
    return params;
}

AttentionPooled attention_pool(std::span<const std::span<const double>> embs,
                               std::span<const double> a_c) {
    if (embs.empty()) throw UnifError("attention pooling requires at least one embedding");
    const std::size_t d = a_c.size();

    AttentionPooled out;
    out.weights.resize(embs.size());
    for (std::size_t i = 0; i < embs.size(); ++i) {
        if (embs[i].size() != d) throw UnifError("attention pooling dimension mismatch");
        out.weights[i] = kernels::dot(a_c.data(), embs[i].data(), d);
    }
    const double peak = *std::max_element(out.weights.begin(), out.weights.end());
    double total = 0.0;
    for (double& w : out.weights) {
        w = std::exp(w - peak);
        total += w;
    }
    for (double& w : out.weights) w /= total;

    out.pooled.assign(d, 0.0);
    for (std::size_t i = 0; i < embs.size(); ++i)
        kernels::axpy(out.weights[i], embs[i].data(), out.pooled.data(), d);
    return out;
}

std::vector<double> embed_code_unif(const TokenBag& code, const UnifParameters& params) {
    const auto rows = known_row_occurrences(code, params.code_embeddings);
    if (rows.empty())
        throw NoKnownTokensError("no token of the snippet is covered by the code matrix");
    std::vector<std::span<const double>> spans;
    spans.reserve(rows.size());
    for (std::size_t r : rows) spans.push_back(params.code_embeddings.row(r));
    return attention_pool(spans, params.attention).pooled;
}

std::vector<double> embed_query_unif(const TokenBag& query, const UnifParameters& params) {
    const auto rows = known_row_occurrences(query, params.query_embeddings);
    if (rows.empty())
        throw NoKnownTokensError("no token of the query is covered by the query matrix");
    const std::size_t d = params.query_embeddings.dim;
    std::vector<double> pooled(d, 0.0);
    for (std::size_t r : rows)
        kernels::axpy(1.0, params.query_embeddings.row(r).data(), pooled.data(), d);
    kernels::scale(pooled.data(), 1.0 / static_cast<double>(rows.size()), d);
    return pooled;
}

namespace {

struct PairState {
    std::vector<std::size_t> code_rows;
    std::vector<std::size_t> query_rows;
    std::vector<double> code_vec;
    std::vector<double> query_vec;
    std::vector<double> alpha;
    double code_norm = 0.0;
    double query_norm = 0.0;
};

// Accumulates w * d cos(x, y) / dx into out, which is
// w * (y / (|x||y|) - cos * x / |x|^2).
void add_cosine_grad(double w, std::span<const double> x, std::span<const double> y,
                     double norm_x, double norm_y, double cosine, std::vector<double>& out) {
    if (out.empty()) out.assign(x.size(), 0.0);
    kernels::axpy(w / (norm_x * norm_y), y.data(), out.data(), x.size());
    kernels::axpy(-w * cosine / (norm_x * norm_x), x.data(), out.data(), x.size());
}

}  // namespace

UnifLoss unif_loss(std::span<const AlignedPair> batch, const UnifParameters& params,
                   const UnifTrainConfig& cfg, Rng& rng) {
    if (batch.empty()) throw UnifError("loss over an empty batch");
    if (batch.size() < 2)
        throw UnifError("batch of size 1 has no in-batch negative to sample");
    if (!(cfg.margin >= 0.0)) throw UnifError("margin must be >= 0");
    if (cfg.negatives_per_positive == 0) throw UnifError("negatives_per_positive must be >= 1");

    const std::size_t d = params.dim();
    if (params.code_embeddings.dim != d || params.query_embeddings.dim != d)
        throw UnifError("parameter dimension mismatch");

    const std::size_t pairs = batch.size();
    const std::size_t negatives = cfg.negatives_per_positive;

    std::vector<PairState> states(pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
        PairState& st = states[i];
        st.code_rows = known_row_occurrences(batch[i].code, params.code_embeddings);
        st.query_rows = known_row_occurrences(batch[i].description, params.query_embeddings);
        if (st.code_rows.empty())
            throw UnifError("pair \"" + batch[i].id + "\": no code token known to the model");
        if (st.query_rows.empty())
            throw UnifError("pair \"" + batch[i].id + "\": no description token known to the model");

        std::vector<std::span<const double>> spans;
        spans.reserve(st.code_rows.size());
        for (std::size_t r : st.code_rows) spans.push_back(params.code_embeddings.row(r));
        AttentionPooled pooled = attention_pool(spans, params.attention);
        st.code_vec = std::move(pooled.pooled);
        st.alpha = std::move(pooled.weights);

        st.query_vec.assign(d, 0.0);
        for (std::size_t r : st.query_rows)
            kernels::axpy(1.0, params.query_embeddings.row(r).data(), st.query_vec.data(), d);
        kernels::scale(st.query_vec.data(), 1.0 / static_cast<double>(st.query_rows.size()), d);

        st.code_norm = std::sqrt(kernels::squared_norm(st.code_vec.data(), d));
        st.query_norm = std::sqrt(kernels::squared_norm(st.query_vec.data(), d));
        if (!(st.code_norm >= kNormFloor))
            throw UnifError("pair \"" + batch[i].id + "\": pooled code vector has near-zero norm");
        if (!(st.query_norm >= kNormFloor))
            throw UnifError("pair \"" + batch[i].id + "\": pooled query vector has near-zero norm");
    }

    auto cosine = [&](const PairState& q, const PairState& c) {
        return kernels::dot(q.query_vec.data(), c.code_vec.data(), d) /
               (q.query_norm * c.code_norm);
    };

    // Upstream gradients dL/de_q and dL/de_c per batch element; empty
    // until the element participates in an active hinge term.
    std::vector<std::vector<double>> grad_query(pairs), grad_code(pairs);
    const double term_scale = 1.0 / static_cast<double>(pairs * negatives);
    double loss = 0.0;

    for (std::size_t i = 0; i < pairs; ++i) {
        const PairState& pos = states[i];
        const double cos_pos = cosine(pos, pos);
        for (std::size_t n = 0; n < negatives; ++n) {
            std::size_t j = static_cast<std::size_t>(rng.below(pairs - 1));
            if (j >= i) ++j;
            const PairState& neg = states[j];
            const double cos_neg = cosine(pos, neg);
            const double term = cfg.margin - cos_pos + cos_neg;
            if (term <= 0.0) continue;
            loss += term_scale * term;

            // d(term)/dq = -dcos_pos/dq + dcos_neg/dq, both at query i.
            add_cosine_grad(-term_scale, pos.query_vec, pos.code_vec, pos.query_norm,
                            pos.code_norm, cos_pos, grad_query[i]);
            add_cosine_grad(term_scale, pos.query_vec, neg.code_vec, pos.query_norm,
                            neg.code_norm, cos_neg, grad_query[i]);
            add_cosine_grad(-term_scale, pos.code_vec, pos.query_vec, pos.code_norm,
                            pos.query_norm, cos_pos, grad_code[i]);
            add_cosine_grad(term_scale, neg.code_vec, pos.query_vec, neg.code_norm,
                            pos.query_norm, cos_neg, grad_code[j]);
        }
    }

    UnifLoss out;
    out.loss = loss;
    out.gradients.attention.assign(d, 0.0);

    for (std::size_t i = 0; i < pairs; ++i) {
        const PairState& st = states[i];

        if (!grad_query[i].empty()) {
            const double inv_m = 1.0 / static_cast<double>(st.query_rows.size());
            for (std::size_t r : st.query_rows) {
                std::vector<double>& row = out.gradients.query_rows[r];
                if (row.empty()) row.assign(d, 0.0);
                kernels::axpy(inv_m, grad_query[i].data(), row.data(), d);
            }
        }

        if (!grad_code[i].empty()) {
            const std::vector<double>& g = grad_code[i];
            const double g_dot_pooled = kernels::dot(g.data(), st.code_vec.data(), d);
            for (std::size_t occ = 0; occ < st.code_rows.size(); ++occ) {
                const std::size_t r = st.code_rows[occ];
                const double weight = st.alpha[occ];
                const auto v = params.code_embeddings.row(r);
                const double g_dot_v = kernels::dot(g.data(), v.data(), d);
                const double through_softmax = weight * (g_dot_v - g_dot_pooled);

                std::vector<double>& row = out.gradients.code_rows[r];
                if (row.empty()) row.assign(d, 0.0);
                kernels::axpy(weight, g.data(), row.data(), d);
                kernels::axpy(through_softmax, params.attention.data(), row.data(), d);
                kernels::axpy(through_softmax, v.data(), out.gradients.attention.data(), d);
            }
        }
    }
    return out;
}

UnifTrainResult train_unif(std::span<const AlignedPair> corpus, UnifParameters params,
                           const UnifTrainConfig& cfg) {
    validate_train_config(cfg);
    const std::size_t d = params.dim();
    if (d == 0 || params.code_embeddings.dim != d || params.query_embeddings.dim != d)
        throw UnifError("parameter dimension mismatch");

    std::vector<AlignedPair> usable;
    usable.reserve(corpus.size());
    std::size_t skipped = 0;
    for (const AlignedPair& pair : corpus) {
        const bool ok = !known_row_occurrences(pair.code, params.code_embeddings).empty() &&
                        !known_row_occurrences(pair.description, params.query_embeddings).empty();
        if (ok)
            usable.push_back(pair);
        else
            ++skipped;
    }
    if (usable.size() < 2)
        throw UnifError("fewer than two trainable pairs (" + std::to_string(skipped) +
                        " skipped as unrepresentable)");

    Rng rng(cfg.seed);
    UnifTrainResult result;
    result.loss_history.reserve(cfg.epochs);

    const std::size_t count = usable.size();
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<AlignedPair> batch;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t pos = 0;
        while (pos < count) {
            std::size_t take = std::min(cfg.batch_size, count - pos);
            if (count - pos - take == 1) ++take;  // never leave a 1-pair batch behind
            batch.clear();
            for (std::size_t k = pos; k < pos + take; ++k) batch.push_back(usable[order[k]]);

            UnifLoss step = unif_loss(batch, params, cfg, rng);
            if (!std::isfinite(step.loss))
                throw UnifError("non-finite loss at epoch " + std::to_string(epoch) +
                                ", batch starting at " + std::to_string(pos));

            for (const auto& [r, g] : step.gradients.code_rows)
                kernels::axpy(-cfg.learning_rate, g.data(),
                              params.code_embeddings.data.data() + r * d, d);
            for (const auto& [r, g] : step.gradients.query_rows)
                kernels::axpy(-cfg.learning_rate, g.data(),
                              params.query_embeddings.data.data() + r * d, d);
            kernels::axpy(-cfg.learning_rate, step.gradients.attention.data(),
                          params.attention.data(), d);

            epoch_loss += step.loss * static_cast<double>(take);
            pos += take;
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(count));
    }

    result.params = std::move(params);
    return result;
}

void save_unif(const UnifParameters& params, const UnifTrainConfig& cfg,
               std::span<const double> loss_history, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw UnifError("cannot create bundle directory " + dir + ": " + ec.message());

    save_embeddings(params.code_embeddings, (fs::path(dir) / "tc.vec").string());
    save_embeddings(params.query_embeddings, (fs::path(dir) / "tq.vec").string());

    nlohmann::json sidecar{
        {"d", params.dim()},
        {"a_c", params.attention},
        {"config",
         {{"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"margin", cfg.margin},
          {"negatives_per_positive", cfg.negatives_per_positive},
          {"seed", cfg.seed}}},
        {"loss_history", std::vector<double>(loss_history.begin(), loss_history.end())},
    };
    const std::string path = (fs::path(dir) / "unif.json").string();
    std::ofstream out(path);
    if (!out) throw UnifError("cannot open " + path + " for writing");
    out << sidecar.dump(2) << '\n';
    if (!out) throw UnifError("failed writing " + path);
}

UnifBundle load_unif(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string path = (fs::path(dir) / "unif.json").string();
    std::ifstream in(path);
    if (!in) throw UnifError("cannot open " + path);
    nlohmann::json sidecar = nlohmann::json::parse(in, nullptr, false);
    if (sidecar.is_discarded()) throw UnifError(path + ": invalid JSON");

    UnifBundle bundle;
    try {
        const std::size_t d = sidecar.at("d").get<std::size_t>();
        bundle.params.attention = sidecar.at("a_c").get<std::vector<double>>();
        if (bundle.params.attention.size() != d)
            throw UnifError(path + ": a_c length disagrees with d");
        const auto& config = sidecar.at("config");
        bundle.config.epochs = config.at("epochs").get<std::size_t>();
        bundle.config.batch_size = config.at("batch_size").get<std::size_t>();
        bundle.config.learning_rate = config.at("learning_rate").get<double>();
        bundle.config.margin = config.at("margin").get<double>();
        bundle.config.negatives_per_positive = config.at("negatives_per_positive").get<std::size_t>();
        bundle.config.seed = config.at("seed").get<std::uint64_t>();
        bundle.loss_history = sidecar.at("loss_history").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw UnifError(path + ": " + e.what());
    }
    for (double v : bundle.params.attention)
        if (!std::isfinite(v)) throw UnifError(path + ": non-finite attention entry");

    bundle.params.code_embeddings = load_embeddings((fs::path(dir) / "tc.vec").string());
    bundle.params.query_embeddings = load_embeddings((fs::path(dir) / "tq.vec").string());
    if (bundle.params.code_embeddings.dim != bundle.params.dim() ||
        bundle.params.query_embeddings.dim != bundle.params.dim())
        throw UnifError(dir + ": embedding matrices disagree with a_c dimension");
    return bundle;
}

std::optional<std::vector<double>> UnifEmbedder::embed_code(const TokenBag& code) const {
    try {
        return embed_code_unif(code, params_);
    } catch (const NoKnownTokensError&) {
        return std::nullopt;
    }
}

std::optional<std::vector<double>> UnifEmbedder::embed_query(const TokenBag& query) const {
    try {
        return embed_query_unif(query, params_);
    } catch (const NoKnownTokensError&) {
        return std::nullopt;
    }
}

}  // namespace codesearch
