#include "codesearch/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "codesearch/corpus.hpp"
#include "codesearch/embedding.hpp"
#include "codesearch/eval.hpp"
#include "codesearch/kernels.hpp"
#include "codesearch/ncs.hpp"
#include "codesearch/search_index.hpp"
#include "codesearch/synthetic.hpp"
#include "codesearch/unif.hpp"

namespace codesearch {

namespace {

using nlohmann::json;

struct Flags {
    std::optional<std::string> config;
    std::optional<std::string> aligned;
    std::optional<std::string> search;
    std::optional<std::string> benchmark;
    std::optional<std::string> embeddings;
    std::optional<std::string> unif_dir;
    std::optional<std::string> index_path;
    std::optional<std::string> out;
    std::optional<std::string> model;
    std::optional<std::string> kernel;
    std::optional<std::uint64_t> seed;
    std::optional<double> threshold;
    std::optional<std::size_t> k;
    bool filter_forum = false;
    std::string query;
};

json load_config(const std::optional<std::string>& path) {
    if (!path) return json::object();
    std::ifstream in(*path);
    if (!in) throw std::runtime_error("cannot open config file: " + *path);
    json cfg = json::parse(in, nullptr, false);
    if (cfg.is_discarded()) throw std::runtime_error(*path + ": invalid JSON");
    if (!cfg.is_object()) throw std::runtime_error(*path + ": config must be a JSON object");
    static const std::set<std::string> known = {
        "aligned", "search",    "benchmark", "embeddings", "unif_dir", "index", "report",
        "model",   "threshold", "k",         "seed",       "skipgram", "unif",  "synthetic"};
    for (const auto& [key, value] : cfg.items())
        if (!known.count(key))
            throw std::runtime_error(*path + ": unknown config key \"" + key + "\"");
    return cfg;
}

void check_section_keys(const json& section, const std::set<std::string>& allowed,
                        const std::string& name) {
    if (!section.is_object())
        throw std::runtime_error("config section \"" + name + "\" must be an object");
    for (const auto& [key, value] : section.items())
        if (!allowed.count(key))
            throw std::runtime_error("unknown key \"" + key + "\" in config section \"" + name +
                                     "\"");
}

template <typename T>
void read_key(const json& section, const char* key, T& into) {
    if (section.contains(key)) into = section.at(key).get<T>();
}

std::string resolve_path(const std::optional<std::string>& flag, const json& cfg, const char* key,
                         const char* fallback, const char* flag_name) {
    if (flag) return *flag;
    if (cfg.contains(key)) {
        if (!cfg.at(key).is_string())
            throw std::runtime_error(std::string("config key \"") + key + "\" must be a string");
        return cfg.at(key).get<std::string>();
    }
    if (fallback) return fallback;
    throw std::runtime_error(std::string("no ") + key + " path given; pass " + flag_name +
                             " or set \"" + key + "\" in the config");
}

std::uint64_t resolve_seed(const Flags& flags, const json& cfg) {
    if (flags.seed) return *flags.seed;
    if (cfg.contains("seed")) return cfg.at("seed").get<std::uint64_t>();
    return 1;
}

std::string resolve_model(const Flags& flags, const json& cfg) {
    std::string model = "ncs";
    if (cfg.contains("model")) model = cfg.at("model").get<std::string>();
    if (flags.model) model = *flags.model;
    if (model != "ncs" && model != "unif")
        throw std::runtime_error("model must be \"ncs\" or \"unif\", got \"" + model + "\"");
    return model;
}

double resolve_threshold(const Flags& flags, const json& cfg) {
    double threshold = 0.6;
    if (cfg.contains("threshold")) threshold = cfg.at("threshold").get<double>();
    if (flags.threshold) threshold = *flags.threshold;
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw std::runtime_error("threshold must lie in [0, 1]");
    return threshold;
}

SkipGramConfig skipgram_config(const json& cfg, std::uint64_t seed) {
    SkipGramConfig out;
    out.seed = seed;
    if (!cfg.contains("skipgram")) return out;
    const json& section = cfg.at("skipgram");
    check_section_keys(section,
                       {"dim", "window", "negatives", "epochs", "learning_rate", "min_count"},
                       "skipgram");
    read_key(section, "dim", out.dim);
    read_key(section, "window", out.window);
    read_key(section, "negatives", out.negatives);
    read_key(section, "epochs", out.epochs);
    read_key(section, "learning_rate", out.learning_rate);
    read_key(section, "min_count", out.min_count);
    return out;
}

UnifTrainConfig unif_config(const json& cfg, std::uint64_t seed) {
    UnifTrainConfig out;
    out.seed = seed;
    if (!cfg.contains("unif")) return out;
    const json& section = cfg.at("unif");
    check_section_keys(
        section, {"epochs", "batch_size", "learning_rate", "margin", "negatives_per_positive"},
        "unif");
    read_key(section, "epochs", out.epochs);
    read_key(section, "batch_size", out.batch_size);
    read_key(section, "learning_rate", out.learning_rate);
    read_key(section, "margin", out.margin);
    read_key(section, "negatives_per_positive", out.negatives_per_positive);
    return out;
}

SyntheticConfig synthetic_config(const json& cfg, std::uint64_t seed) {
    SyntheticConfig out;
    out.seed = seed;
    if (!cfg.contains("synthetic")) return out;
    const json& section = cfg.at("synthetic");
    check_section_keys(section,
                       {"pairs", "benchmark", "search_size", "concepts", "concepts_per_snippet",
                        "noise_rate", "vocab_overlap", "noise_vocab"},
                       "synthetic");
    read_key(section, "pairs", out.pairs);
    read_key(section, "benchmark", out.benchmark);
    read_key(section, "search_size", out.search_size);
    read_key(section, "concepts", out.concepts);
    read_key(section, "concepts_per_snippet", out.concepts_per_snippet);
    read_key(section, "noise_rate", out.noise_rate);
    read_key(section, "vocab_overlap", out.vocab_overlap);
    read_key(section, "noise_vocab", out.noise_vocab);
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string text;
    for (const std::string& t : tokens) {
        if (!text.empty()) text += " ";
        text += t;
    }
    return text;
}

std::vector<AlignedPair> load_training_pairs(const std::string& path, bool filter_forum) {
    std::vector<AlignedPair> pairs = load_aligned_corpus(path);
    if (!filter_forum) return pairs;
    std::vector<AlignedPair> kept;
    kept.reserve(pairs.size());
    for (AlignedPair& pair : pairs)
        if (filter_forum_pair(join_tokens(pair.description.tokens), pair.raw_code))
            kept.push_back(std::move(pair));
    std::cerr << "forum filter kept " << kept.size() << " of " << pairs.size() << " pairs\n";
    return kept;
}

// The skip-gram pretrainer sees each side of each pair as its own
// document, so the two vocabularies only mix through supervision.
std::vector<TokenBag> pretraining_documents(const std::vector<AlignedPair>& pairs) {
    std::vector<TokenBag> docs;
    docs.reserve(pairs.size() * 2);
    for (const AlignedPair& pair : pairs) {
        docs.push_back(pair.code);
        docs.push_back(pair.description);
    }
    return docs;
}

std::unique_ptr<Embedder> make_embedder(const std::string& model, const Flags& flags,
                                        const json& cfg,
                                        const std::vector<SearchDocument>* idf_corpus) {
    if (model == "ncs") {
        const std::string path =
            resolve_path(flags.embeddings, cfg, "embeddings", "embeddings.vec", "--embeddings");
        EmbeddingMatrix matrix = load_embeddings(path);
        IdfTable idf;
        if (idf_corpus) {
            std::vector<TokenBag> bags;
            bags.reserve(idf_corpus->size());
            for (const SearchDocument& doc : *idf_corpus) bags.push_back(doc.code);
            idf = compute_idf(bags);
        }
        return std::make_unique<NcsEmbedder>(std::move(matrix), std::move(idf));
    }
    const std::string dir = resolve_path(flags.unif_dir, cfg, "unif_dir", "unif", "--unif-dir");
    UnifBundle bundle = load_unif(dir);
    return std::make_unique<UnifEmbedder>(std::move(bundle.params));
}

int cmd_train_embeddings(const Flags& flags) {
    const json cfg = load_config(flags.config);
    const std::uint64_t seed = resolve_seed(flags, cfg);
    const std::string aligned_path =
        resolve_path(flags.aligned, cfg, "aligned", nullptr, "--aligned");
    const std::string out =
        flags.out ? *flags.out
                  : resolve_path(std::nullopt, cfg, "embeddings", "embeddings.vec", "--out");

    const auto pairs = load_training_pairs(aligned_path, flags.filter_forum);
    const auto docs = pretraining_documents(pairs);
    const SkipGramConfig sg = skipgram_config(cfg, seed);
    const EmbeddingMatrix matrix = train_skipgram(docs, sg);
    save_embeddings(matrix, out);
    std::cerr << "trained " << matrix.rows() << " token embeddings (dim " << matrix.dim
              << ") over " << pairs.size() << " pairs -> " << out << "\n";
    return 0;
}

int cmd_train_unif(const Flags& flags) {
    const json cfg = load_config(flags.config);
    const std::uint64_t seed = resolve_seed(flags, cfg);
    const std::string aligned_path =
        resolve_path(flags.aligned, cfg, "aligned", nullptr, "--aligned");
    const std::string embeddings_path =
        resolve_path(flags.embeddings, cfg, "embeddings", "embeddings.vec", "--embeddings");
    const std::string out =
        flags.out ? *flags.out : resolve_path(std::nullopt, cfg, "unif_dir", "unif", "--out");

    const auto pairs = load_training_pairs(aligned_path, flags.filter_forum);
    const EmbeddingMatrix pretrained = load_embeddings(embeddings_path);
    UnifParameters params = init_unif(pretrained, pairs, seed);
    const UnifTrainConfig uc = unif_config(cfg, seed);
    UnifTrainResult result = train_unif(pairs, std::move(params), uc);
    save_unif(result.params, uc, result.loss_history, out);
    if (!result.loss_history.empty())
        std::cerr << "hinge loss " << result.loss_history.front() << " -> "
                  << result.loss_history.back() << " over " << result.loss_history.size()
                  << " epochs -> " << out << "\n";
    return 0;
}

int cmd_index(const Flags& flags) {
    const json cfg = load_config(flags.config);
    const std::string model = resolve_model(flags, cfg);
    const std::string search_path = resolve_path(flags.search, cfg, "search", nullptr, "--search");
    const std::string out =
        flags.out ? *flags.out : resolve_path(std::nullopt, cfg, "index", "index.bin", "--out");

    const std::vector<SearchDocument> docs = dedup(load_search_corpus(search_path));
    const auto embedder = make_embedder(model, flags, cfg, &docs);
    std::size_t skipped = 0;
    const SearchIndex index = build_index_from_corpus(*embedder, docs, &skipped);
    index.save(out);
    std::cerr << "indexed " << index.size() << " snippets (model " << model << ", " << skipped
              << " unrepresentable) -> " << out << "\n";
    return 0;
}

int cmd_search(const Flags& flags) {
    const json cfg = load_config(flags.config);
    const std::string model = resolve_model(flags, cfg);
    const std::string index_path =
        resolve_path(flags.index_path, cfg, "index", "index.bin", "--index");
    const std::string search_path = resolve_path(flags.search, cfg, "search", nullptr, "--search");
    std::size_t k = 10;
    if (cfg.contains("k")) k = cfg.at("k").get<std::size_t>();
    if (flags.k) k = *flags.k;
    if (k == 0) throw std::runtime_error("--k must be >= 1");

    const SearchIndex index = SearchIndex::load(index_path);
    const auto embedder = make_embedder(model, flags, cfg, nullptr);
    const TokenBag query = tokenize(flags.query);
    const auto vec = embedder->embed_query(query);
    if (!vec) throw std::runtime_error("query has no token known to the model");

    std::unordered_map<std::string, const std::string*> raw_by_id;
    const std::vector<SearchDocument> docs = load_search_corpus(search_path);
    raw_by_id.reserve(docs.size());
    for (const SearchDocument& doc : docs) raw_by_id.emplace(doc.id, &doc.raw_code);

    const auto hits = index.search(*vec, k);
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    for (std::size_t i = 0; i < hits.size(); ++i) {
        std::string excerpt;
        if (auto it = raw_by_id.find(hits[i].id); it != raw_by_id.end()) {
            excerpt = *it->second;
            std::replace(excerpt.begin(), excerpt.end(), '\n', ' ');
            if (excerpt.size() > 96) excerpt = excerpt.substr(0, 93) + "...";
        }
        out << (i + 1) << '\t' << hits[i].id << '\t' << hits[i].score << '\t' << excerpt << '\n';
    }
    std::cout << out.str();
    return 0;
}

int cmd_eval(const Flags& flags) {
    const json cfg = load_config(flags.config);
    const std::string model = resolve_model(flags, cfg);
    const std::string search_path = resolve_path(flags.search, cfg, "search", nullptr, "--search");
    const std::string benchmark_path =
        resolve_path(flags.benchmark, cfg, "benchmark", nullptr, "--benchmark");
    const double threshold = resolve_threshold(flags, cfg);
    const std::string prefix =
        flags.out ? *flags.out : resolve_path(std::nullopt, cfg, "report", "report", "--out");

    const std::vector<SearchDocument> docs = dedup(load_search_corpus(search_path));
    const std::vector<BenchmarkQuery> benchmark = load_benchmark(benchmark_path);
    const auto embedder = make_embedder(model, flags, cfg, &docs);

    const EvalReport report = run_pipeline(*embedder, docs, benchmark, 10, threshold);

    const std::string json_path = prefix + ".json";
    const std::string table_path = prefix + ".txt";
    std::ofstream json_out(json_path);
    if (!json_out) throw std::runtime_error("cannot open " + json_path + " for writing");
    json_out << report_to_json(report);
    std::ofstream table_out(table_path);
    if (!table_out) throw std::runtime_error("cannot open " + table_path + " for writing");
    table_out << report_to_table(report);

    std::cout << report_to_table(report);
    std::cerr << "report -> " << json_path << ", " << table_path << "\n";
    return 0;
}

int cmd_gen_synthetic(const Flags& flags) {
    const json cfg = load_config(flags.config);
    const std::uint64_t seed = resolve_seed(flags, cfg);
    const SyntheticConfig sc = synthetic_config(cfg, seed);
    const std::string out = flags.out ? *flags.out : "synthetic";
    const SyntheticCorpus corpus = generate_synthetic(sc);
    write_synthetic(corpus, out);
    std::cerr << "wrote " << corpus.aligned.size() << " aligned pairs, " << corpus.search.size()
              << " search snippets, " << corpus.benchmark.size() << " benchmark queries -> " << out
              << "\n";
    return 0;
}

void apply_kernel_choice(const std::optional<std::string>& kernel) {
    if (!kernel) return;
    kernels::Backend backend;
    if (*kernel == "auto")
        backend = kernels::Backend::Auto;
    else if (*kernel == "scalar")
        backend = kernels::Backend::Scalar;
    else if (*kernel == "avx2")
        backend = kernels::Backend::Avx2;
    else
        throw std::runtime_error("--kernel must be auto, scalar, or avx2");
    if (!kernels::set_backend(backend))
        throw std::runtime_error("kernel backend \"" + *kernel +
                                 "\" is not available on this host");
}

}  // namespace

int run_cli(std::vector<std::string> args) {
    CLI::App app{"token-embedding code search: train, index, search, evaluate"};
    app.require_subcommand(1);
    Flags flags;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "JSON config file");
        sub->add_option("--seed", flags.seed, "RNG seed (overrides config)");
        sub->add_option("--out", flags.out, "output path");
        sub->add_option("--kernel", flags.kernel, "vector kernels: auto, scalar, avx2");
    };

    CLI::App* train_emb =
        app.add_subcommand("train-embeddings", "pretrain token embeddings on an aligned corpus");
    add_common(train_emb);
    train_emb->add_option("--aligned", flags.aligned, "aligned corpus (JSONL)");
    train_emb->add_flag("--filter-forum", flags.filter_forum,
                        "apply the forum-pair heuristics before training");

    CLI::App* train_unif_cmd =
        app.add_subcommand("train-unif", "train the supervised model from pretrained embeddings");
    add_common(train_unif_cmd);
    train_unif_cmd->add_option("--aligned", flags.aligned, "aligned corpus (JSONL)");
    train_unif_cmd->add_option("--embeddings", flags.embeddings, "pretrained embedding file");
    train_unif_cmd->add_flag("--filter-forum", flags.filter_forum,
                             "apply the forum-pair heuristics before training");

    CLI::App* index_cmd = app.add_subcommand("index", "embed a search corpus into a vector index");
    add_common(index_cmd);
    index_cmd->add_option("--search", flags.search, "search corpus (JSONL)");
    index_cmd->add_option("--model", flags.model, "ncs or unif");
    index_cmd->add_option("--embeddings", flags.embeddings, "embedding file (ncs)");
    index_cmd->add_option("--unif-dir", flags.unif_dir, "parameter bundle directory (unif)");

    CLI::App* search_cmd = app.add_subcommand("search", "query an index");
    add_common(search_cmd);
    search_cmd->add_option("query", flags.query, "query text")->required();
    search_cmd->add_option("--k", flags.k, "results to return (default 10)");
    search_cmd->add_option("--model", flags.model, "ncs or unif");
    search_cmd->add_option("--index", flags.index_path, "index file");
    search_cmd->add_option("--search", flags.search, "search corpus (JSONL), for result excerpts");
    search_cmd->add_option("--embeddings", flags.embeddings, "embedding file (ncs)");
    search_cmd->add_option("--unif-dir", flags.unif_dir, "parameter bundle directory (unif)");

    CLI::App* eval_cmd = app.add_subcommand("eval", "run the retrieval benchmark");
    add_common(eval_cmd);
    eval_cmd->add_option("--search", flags.search, "search corpus (JSONL)");
    eval_cmd->add_option("--benchmark", flags.benchmark, "benchmark queries (JSONL)");
    eval_cmd->add_option("--model", flags.model, "ncs or unif");
    eval_cmd->add_option("--embeddings", flags.embeddings, "embedding file (ncs)");
    eval_cmd->add_option("--unif-dir", flags.unif_dir, "parameter bundle directory (unif)");
    eval_cmd->add_option("--threshold", flags.threshold, "answer similarity threshold");

    CLI::App* gen_cmd =
        app.add_subcommand("gen-synthetic", "generate a planted-correspondence corpus");
    add_common(gen_cmd);

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("codesearch");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        apply_kernel_choice(flags.kernel);
        if (train_emb->parsed()) return cmd_train_embeddings(flags);
        if (train_unif_cmd->parsed()) return cmd_train_unif(flags);
        if (index_cmd->parsed()) return cmd_index(flags);
        if (search_cmd->parsed()) return cmd_search(flags);
        if (eval_cmd->parsed()) return cmd_eval(flags);
        if (gen_cmd->parsed()) return cmd_gen_synthetic(flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace codesearch
