#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace codesearch {

class IndexError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SearchHit {
    std::string id;
    double score;
};

struct IndexEntry {
    std::string id;
    std::vector<double> vector;
};

// Exact cosine index: unit-normalized rows, brute-force scored and
// partially selected on search. Immutable after build; concurrent
// searches are safe.
class SearchIndex {
  public:
    static SearchIndex build(std::span<const IndexEntry> entries);

    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const float> row(std::size_t i) const {
        return {vectors_.data() + i * dim_, dim_};
    }

    // Top-k by cosine similarity, descending; ties broken by insertion
    // order. Throws on k < 1, zero-norm or mismatched query.
    std::vector<SearchHit> search(std::span<const double> query, std::size_t k) const;

    void save(const std::string& path) const;
    static SearchIndex load(const std::string& path);

  private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<float> vectors_;  // row-major, unit-norm rows
};

}  // namespace codesearch
