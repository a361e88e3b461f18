#include "codesearch/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "codesearch/rng.hpp"

namespace codesearch {

namespace {

// Bijective base-26 suffix: 0 -> "a", 25 -> "z", 26 -> "aa".
std::string letters(std::size_t n) {
    std::string out;
    ++n;
    while (n > 0) {
        --n;
        out.push_back(static_cast<char>('a' + n % 26));
        n /= 26;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::string set_key(const std::vector<std::size_t>& concepts) {
    std::string key;
    for (std::size_t c : concepts) {
        key += std::to_string(c);
        key.push_back(',');
    }
    return key;
}

void validate(const SyntheticConfig& cfg) {
    if (cfg.concepts_per_snippet == 0)
        throw SyntheticError("concepts_per_snippet must be >= 1");
    if (cfg.concepts < cfg.concepts_per_snippet)
        throw SyntheticError("concept vocabulary smaller than concepts_per_snippet");
    if (cfg.pairs < 2) throw SyntheticError("need at least two aligned pairs");
    if (cfg.benchmark == 0) throw SyntheticError("need at least one benchmark query");
    if (cfg.search_size < cfg.benchmark)
        throw SyntheticError("search corpus must be able to hold every truth snippet");
    if (cfg.search_size - cfg.benchmark > cfg.pairs)
        throw SyntheticError("not enough aligned pairs to fill the search corpus");
    if (!(cfg.noise_rate >= 0.0 && cfg.noise_rate < 1.0))
        throw SyntheticError("noise_rate must lie in [0, 1)");
    if (!(cfg.vocab_overlap >= 0.0 && cfg.vocab_overlap <= 1.0))
        throw SyntheticError("vocab_overlap must lie in [0, 1]");
    if (cfg.noise_rate > 0.0 && cfg.noise_vocab == 0)
        throw SyntheticError("noise_rate > 0 requires a non-empty noise vocabulary");
}

class Generator {
  public:
    explicit Generator(const SyntheticConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
        const double m = static_cast<double>(cfg.concepts_per_snippet);
        noise_per_snippet_ = static_cast<std::size_t>(
            std::llround(m * cfg.noise_rate / (1.0 - cfg.noise_rate)));
        const std::size_t shared = static_cast<std::size_t>(
            std::floor(cfg.vocab_overlap * static_cast<double>(cfg.concepts)));
        code_tokens_.reserve(cfg.concepts);
        query_tokens_.reserve(cfg.concepts);
        for (std::size_t j = 0; j < cfg.concepts; ++j) {
            if (j < shared) {
                code_tokens_.push_back("s" + letters(j));
                query_tokens_.push_back("s" + letters(j));
            } else {
                code_tokens_.push_back("c" + letters(j));
                query_tokens_.push_back("q" + letters(j));
            }
        }
    }

    SyntheticCorpus run() {
        SyntheticCorpus corpus;

        std::vector<std::vector<std::size_t>> train_sets;
        train_sets.reserve(cfg_.pairs);
        for (std::size_t i = 0; i < cfg_.pairs; ++i) train_sets.push_back(next_set(i));

        corpus.aligned.reserve(cfg_.pairs);
        for (std::size_t i = 0; i < cfg_.pairs; ++i) {
            AlignedPair pair;
            pair.id = "p" + std::to_string(i);
            pair.raw_code = render_code(train_sets[i]);
            pair.code = tokenize(pair.raw_code);
            pair.description = tokenize(render_query(train_sets[i]));
            corpus.aligned.push_back(std::move(pair));
        }

        corpus.benchmark.reserve(cfg_.benchmark);
        std::vector<std::string> truth_raws;
        truth_raws.reserve(cfg_.benchmark);
        for (std::size_t i = 0; i < cfg_.benchmark; ++i) {
            const auto concepts = random_unique_set();
            BenchmarkQuery query;
            query.id = "b" + std::to_string(i);
            query.query_text = render_query(concepts);
            query.query = tokenize(query.query_text);
            query.truth_raw = render_code(concepts);
            query.truth = tokenize(query.truth_raw);
            truth_raws.push_back(query.truth_raw);
            corpus.benchmark.push_back(std::move(query));
        }

        std::vector<std::string> search_raws = std::move(truth_raws);
        for (std::size_t i = 0; i + cfg_.benchmark < cfg_.search_size; ++i)
            search_raws.push_back(corpus.aligned[i].raw_code);
        rng_.shuffle(search_raws);
        corpus.search.reserve(search_raws.size());
        for (std::size_t i = 0; i < search_raws.size(); ++i) {
            SearchDocument doc;
            doc.id = "s" + std::to_string(i);
            doc.raw_code = search_raws[i];
            doc.code = tokenize(doc.raw_code);
            corpus.search.push_back(std::move(doc));
        }
        return corpus;
    }

  private:
    // First two passes cycle through the concept vocabulary (the second
    // offset by half a snippet) so every concept is planted at least
    // twice; later snippets draw at random. All concept sets are unique.
    std::vector<std::size_t> next_set(std::size_t i) {
        const std::size_t m = cfg_.concepts_per_snippet;
        const std::size_t cycle = (cfg_.concepts + m - 1) / m;
        std::vector<std::size_t> concepts;
        if (i < 2 * cycle) {
            const std::size_t lap = i / cycle;
            const std::size_t slot = i % cycle;
            const std::size_t offset = lap == 0 ? 0 : m / 2;
            concepts.resize(m);
            for (std::size_t t = 0; t < m; ++t)
                concepts[t] = (slot * m + offset + t) % cfg_.concepts;
            std::sort(concepts.begin(), concepts.end());
            concepts.erase(std::unique(concepts.begin(), concepts.end()), concepts.end());
            if (concepts.size() == m && used_.insert(set_key(concepts)).second)
                return concepts;
        }
        return random_unique_set();
    }

    std::vector<std::size_t> random_unique_set() {
        for (int attempt = 0; attempt < 10000; ++attempt) {
            std::vector<std::size_t> concepts = draw_distinct();
            if (used_.insert(set_key(concepts)).second) return concepts;
        }
        throw SyntheticError("could not draw a fresh concept set; "
                             "concept vocabulary too small for the requested corpus");
    }

    std::vector<std::size_t> draw_distinct() {
        std::vector<std::size_t> concepts;
        concepts.reserve(cfg_.concepts_per_snippet);
        while (concepts.size() < cfg_.concepts_per_snippet) {
            const std::size_t c = static_cast<std::size_t>(rng_.below(cfg_.concepts));
            if (std::find(concepts.begin(), concepts.end(), c) == concepts.end())
                concepts.push_back(c);
        }
        std::sort(concepts.begin(), concepts.end());
        return concepts;
    }

    std::string render_code(const std::vector<std::size_t>& concepts) {
        std::vector<std::string> tokens;
        tokens.reserve(concepts.size() + noise_per_snippet_);
        for (std::size_t c : concepts) tokens.push_back(code_tokens_[c]);
        for (std::size_t n = 0; n < noise_per_snippet_; ++n)
            tokens.push_back("nc" + letters(static_cast<std::size_t>(rng_.below(cfg_.noise_vocab))));
        std::string out = tokens[0] + "(";
        for (std::size_t t = 1; t < tokens.size(); ++t) {
            if (t > 1) out += ", ";
            out += tokens[t];
        }
        return out + ")";
    }

    std::string render_query(const std::vector<std::size_t>& concepts) {
        std::string out;
        for (std::size_t c : concepts) {
            if (!out.empty()) out += " ";
            out += query_tokens_[c];
        }
        for (std::size_t n = 0; n < noise_per_snippet_; ++n)
            out += " nq" + letters(static_cast<std::size_t>(rng_.below(cfg_.noise_vocab)));
        return out;
    }

    SyntheticConfig cfg_;
    Rng rng_;
    std::size_t noise_per_snippet_ = 0;
    std::vector<std::string> code_tokens_;
    std::vector<std::string> query_tokens_;
    std::unordered_set<std::string> used_;
};

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg) {
    validate(cfg);
    return Generator(cfg).run();
}

void write_synthetic(const SyntheticCorpus& corpus, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw SyntheticError("cannot create directory " + dir + ": " + ec.message());

    auto open = [&](const char* name) {
        std::ofstream out(fs::path(dir) / name);
        if (!out) throw SyntheticError(std::string("cannot open ") + name + " under " + dir);
        return out;
    };

    auto join = [](const std::vector<std::string>& tokens) {
        std::string text;
        for (const std::string& t : tokens) {
            if (!text.empty()) text += " ";
            text += t;
        }
        return text;
    };

    {
        std::ofstream out = open("aligned.jsonl");
        for (const AlignedPair& pair : corpus.aligned) {
            nlohmann::ordered_json record{
                {"id", pair.id}, {"code", pair.raw_code}, {"nl", join(pair.description.tokens)}};
            out << record.dump() << '\n';
        }
    }
    {
        std::ofstream out = open("search.jsonl");
        for (const SearchDocument& doc : corpus.search)
            out << nlohmann::ordered_json{{"id", doc.id}, {"code", doc.raw_code}}.dump() << '\n';
    }
    {
        std::ofstream out = open("benchmark.jsonl");
        for (const BenchmarkQuery& query : corpus.benchmark)
            out << nlohmann::ordered_json{{"id", query.id},
                                          {"query", query.query_text},
                                          {"truth_code", query.truth_raw}}
                       .dump()
                << '\n';
    }
}

}  // namespace codesearch
