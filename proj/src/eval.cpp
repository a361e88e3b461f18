#include "codesearch/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace codesearch {

double snippet_similarity(const TokenBag& candidate, const TokenBag& truth) {
    if (truth.empty()) throw EvalError("similarity against an empty truth snippet");
    const std::unordered_set<std::string> truth_set(truth.tokens.begin(), truth.tokens.end());
    std::unordered_set<std::string> hit;
    for (const std::string& token : candidate.tokens)
        if (truth_set.count(token)) hit.insert(token);
    return static_cast<double>(hit.size()) / static_cast<double>(truth_set.size());
}

Judgment judge(std::span<const RetrievedSnippet> results, const TokenBag& truth,
               double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw EvalError("threshold must lie in [0, 1]");
    Judgment judgment;
    judgment.similarities.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        const double sim = snippet_similarity(results[i].code, truth);
        judgment.similarities.push_back(sim);
        if (!judgment.first_hit_rank && sim >= threshold)
            judgment.first_hit_rank = i + 1;
    }
    return judgment;
}

std::size_t answered_at_k(std::span<const Judgment> judgments, std::size_t k) {
    std::size_t count = 0;
    for (const Judgment& j : judgments)
        if (j.first_hit_rank && *j.first_hit_rank <= k) ++count;
    return count;
}

double mrr(std::span<const Judgment> judgments) {
    if (judgments.empty()) return 0.0;
    double total = 0.0;
    for (const Judgment& j : judgments)
        if (j.first_hit_rank) total += 1.0 / static_cast<double>(*j.first_hit_rank);
    return total / static_cast<double>(judgments.size());
}

double calibrate_threshold(std::span<const LabeledPair> labeled) {
    double total = 0.0;
    std::size_t relevant = 0;
    for (const LabeledPair& pair : labeled) {
        if (!pair.relevant) continue;
        total += snippet_similarity(pair.candidate, pair.truth);
        ++relevant;
    }
    if (relevant == 0)
        throw EvalError("threshold calibration needs at least one relevant-labeled pair");
    return total / static_cast<double>(relevant);
}

SearchIndex build_index_from_corpus(const Embedder& model,
                                    std::span<const SearchDocument> corpus,
                                    std::size_t* skipped) {
    std::vector<IndexEntry> entries;
    entries.reserve(corpus.size());
    std::size_t dropped = 0;
    for (const SearchDocument& doc : corpus) {
        auto vec = model.embed_code(doc.code);
        if (!vec) {
            ++dropped;
            continue;
        }
        entries.push_back({doc.id, std::move(*vec)});
    }
    if (skipped) *skipped = dropped;
    return SearchIndex::build(entries);
}

EvalReport run_pipeline(const Embedder& model, std::span<const SearchDocument> corpus,
                        std::span<const BenchmarkQuery> benchmark, std::size_t k_max,
                        double threshold) {
    if (benchmark.empty()) throw EvalError("benchmark is empty");
    if (k_max == 0) throw EvalError("k_max must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw EvalError("threshold must lie in [0, 1]");

    EvalReport report;
    report.threshold = threshold;
    report.query_count = benchmark.size();

    const SearchIndex index = build_index_from_corpus(model, corpus, &report.skipped_documents);

    std::unordered_map<std::string, const TokenBag*> bags_by_id;
    bags_by_id.reserve(corpus.size());
    for (const SearchDocument& doc : corpus) bags_by_id.emplace(doc.id, &doc.code);

    report.judgments.reserve(benchmark.size());
    for (const BenchmarkQuery& query : benchmark) {
        auto vec = model.embed_query(query.query);
        if (!vec) {
            Judgment judgment;
            judgment.query_id = query.id;
            judgment.embedding_failed = true;
            report.judgments.push_back(std::move(judgment));
            continue;
        }
        const auto hits = index.size() ? index.search(*vec, k_max) : std::vector<SearchHit>{};
        std::vector<RetrievedSnippet> results;
        results.reserve(hits.size());
        for (const SearchHit& hit : hits) {
            auto it = bags_by_id.find(hit.id);
            if (it == bags_by_id.end())
                throw EvalError("index returned unknown id \"" + hit.id + "\"");
            results.push_back({hit.id, *it->second});
        }
        Judgment judgment = judge(results, query.truth, threshold);
        judgment.query_id = query.id;
        report.judgments.push_back(std::move(judgment));
    }

    report.answered_at_1 = answered_at_k(report.judgments, 1);
    report.answered_at_5 = answered_at_k(report.judgments, 5);
    report.answered_at_10 = answered_at_k(report.judgments, 10);
    report.mean_reciprocal_rank = mrr(report.judgments);
    return report;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::ordered_json doc;
    doc["answered"] = {{"1", report.answered_at_1},
                       {"5", report.answered_at_5},
                       {"10", report.answered_at_10}};
    doc["mrr"] = report.mean_reciprocal_rank;
    doc["threshold"] = report.threshold;
    doc["queries"] = nlohmann::ordered_json::array();
    for (const Judgment& j : report.judgments) {
        nlohmann::ordered_json entry;
        entry["id"] = j.query_id;
        if (j.first_hit_rank)
            entry["rank"] = *j.first_hit_rank;
        else
            entry["rank"] = nullptr;
        entry["similarities"] = j.similarities;
        entry["embedding_failed"] = j.embedding_failed;
        doc["queries"].push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

std::string report_to_table(const EvalReport& report) {
    std::ostringstream out;
    out << std::right;
    out << std::setw(8) << "queries" << std::setw(12) << "answered@1" << std::setw(12)
        << "answered@5" << std::setw(13) << "answered@10" << std::setw(9) << "mrr"
        << std::setw(11) << "threshold" << '\n';
    out << std::setw(8) << report.query_count << std::setw(12) << report.answered_at_1
        << std::setw(12) << report.answered_at_5 << std::setw(13) << report.answered_at_10
        << std::setw(9) << std::fixed << std::setprecision(4) << report.mean_reciprocal_rank
        << std::setw(11) << std::setprecision(2) << report.threshold << '\n';
    if (report.skipped_documents)
        out << "(" << report.skipped_documents
            << " search snippets were not representable and were left unindexed)\n";
    return out.str();
}

}  // namespace codesearch
