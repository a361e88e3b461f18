#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "codesearch/corpus.hpp"

namespace codesearch {

class VocabularyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Token table indexed in descending corpus frequency, ties broken
// lexicographically. Indices are contiguous from 0.
struct Vocabulary {
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> frequencies;
    std::unordered_map<std::string, std::size_t> index_of;

    std::size_t size() const { return tokens.size(); }

    bool contains(const std::string& token) const {
        return index_of.find(token) != index_of.end();
    }

    // SIZE_MAX when absent.
    std::size_t find(const std::string& token) const {
        auto it = index_of.find(token);
        return it == index_of.end() ? static_cast<std::size_t>(-1) : it->second;
    }
};

// Tokens with total corpus frequency >= min_count. Throws VocabularyError
// when nothing survives the cutoff.
Vocabulary build_vocabulary(std::span<const TokenBag> corpus, std::uint64_t min_count);

}  // namespace codesearch
