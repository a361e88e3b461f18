#include "codesearch/vocabulary.hpp"

#include <algorithm>
#include <map>

namespace codesearch {

Vocabulary build_vocabulary(std::span<const TokenBag> corpus, std::uint64_t min_count) {
    std::unordered_map<std::string, std::uint64_t> counts;
    for (const TokenBag& bag : corpus)
        for (const std::string& token : bag.tokens) ++counts[token];

    std::vector<std::pair<std::string, std::uint64_t>> kept;
    kept.reserve(counts.size());
    for (auto& [token, count] : counts)
        if (count >= min_count) kept.emplace_back(token, count);
    if (kept.empty())
        throw VocabularyError("vocabulary is empty after applying min_count=" +
                              std::to_string(min_count));

    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    vocab.tokens.reserve(kept.size());
    vocab.frequencies.reserve(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        vocab.tokens.push_back(kept[i].first);
        vocab.frequencies.push_back(kept[i].second);
        vocab.index_of.emplace(kept[i].first, i);
    }
    return vocab;
}

}  // namespace codesearch
