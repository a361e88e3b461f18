#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "codesearch/corpus.hpp"

namespace codesearch {

// Maps token bags to dense vectors on both sides of the retrieval task.
// Returns nullopt when a bag has nothing the model can represent.
class Embedder {
  public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    virtual std::optional<std::vector<double>> embed_code(const TokenBag& code) const = 0;
    virtual std::optional<std::vector<double>> embed_query(const TokenBag& query) const = 0;
};

}  // namespace codesearch
