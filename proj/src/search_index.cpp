#include "codesearch/search_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "codesearch/kernels.hpp"

namespace codesearch {

namespace {

constexpr char kMagic[4] = {'N', 'C', 'S', 'I'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

class Reader {
  public:
    Reader(std::string data, std::string path)
        : data_(std::move(data)), path_(std::move(path)) {}

    std::uint32_t u32() {
        need(4, "integer");
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i)
            v = (v << 8) | static_cast<std::uint8_t>(data_[pos_ + static_cast<std::size_t>(i)]);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        const std::uint64_t hi = u32();
        return lo | (hi << 32);
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    bool done() const { return pos_ == data_.size(); }
    const std::string& path() const { return path_; }

  private:
    void need(std::size_t n, const char* what) const {
        if (data_.size() - pos_ < n)
            throw IndexError(path_ + ": truncated index file while reading " + what);
    }

    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace

SearchIndex SearchIndex::build(std::span<const IndexEntry> entries) {
    SearchIndex index;
    if (entries.empty()) return index;

    index.dim_ = entries.front().vector.size();
    if (index.dim_ == 0) throw IndexError("cannot index zero-dimensional vectors");
    index.ids_.reserve(entries.size());
    index.vectors_.reserve(entries.size() * index.dim_);

    std::unordered_set<std::string> seen;
    seen.reserve(entries.size());
    for (const IndexEntry& entry : entries) {
        if (entry.vector.size() != index.dim_)
            throw IndexError("vector dimension mismatch for id \"" + entry.id + "\": expected " +
                             std::to_string(index.dim_) + ", got " +
                             std::to_string(entry.vector.size()));
        const double norm = std::sqrt(kernels::squared_norm(entry.vector.data(), index.dim_));
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw IndexError("cannot index zero-norm vector for id \"" + entry.id + "\"");
        if (!seen.insert(entry.id).second)
            throw IndexError("duplicate id in index: \"" + entry.id + "\"");
        index.ids_.push_back(entry.id);
        for (double v : entry.vector)
            index.vectors_.push_back(static_cast<float>(v / norm));
    }
    return index;
}

std::vector<SearchHit> SearchIndex::search(std::span<const double> query, std::size_t k) const {
    if (k == 0) throw IndexError("search requires k >= 1");
    if (ids_.empty()) return {};
    if (query.size() != dim_)
        throw IndexError("query dimension mismatch: index has " + std::to_string(dim_) +
                         ", query has " + std::to_string(query.size()));
    const double norm = std::sqrt(kernels::squared_norm(query.data(), dim_));
    if (!(norm > 0.0) || !std::isfinite(norm))
        throw IndexError("cannot search with a zero-norm query");

    std::vector<float> unit(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
        unit[i] = static_cast<float>(query[i] / norm);

    std::vector<double> scores(ids_.size());
    kernels::scores_f32(vectors_.data(), ids_.size(), dim_, unit.data(), scores.data());
    for (double& s : scores) s = std::clamp(s, -1.0, 1.0);

    std::vector<std::size_t> order(ids_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t take = std::min(k, order.size());
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                      order.end(), better);

    std::vector<SearchHit> hits;
    hits.reserve(take);
    for (std::size_t i = 0; i < take; ++i)
        hits.push_back({ids_[order[i]], scores[order[i]]});
    return hits;
}

void SearchIndex::save(const std::string& path) const {
    std::string blob;
    blob.append(kMagic, sizeof(kMagic));
    put_u32(blob, kVersion);
    put_u32(blob, static_cast<std::uint32_t>(dim_));
    put_u64(blob, ids_.size());
    for (const std::string& id : ids_) {
        put_u32(blob, static_cast<std::uint32_t>(id.size()));
        blob += id;
    }
    for (float v : vectors_) put_u32(blob, std::bit_cast<std::uint32_t>(v));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IndexError("cannot open index file for writing: " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IndexError("failed writing index file: " + path);
}

SearchIndex SearchIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IndexError("cannot open index file: " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader reader(std::move(data), path);

    if (reader.bytes(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic)))
        throw IndexError(path + ": not an index file (bad magic)");
    const std::uint32_t version = reader.u32();
    if (version != kVersion)
        throw IndexError(path + ": unsupported index version " + std::to_string(version));

    SearchIndex index;
    index.dim_ = reader.u32();
    const std::uint64_t rows = reader.u64();
    if (rows > 0 && index.dim_ == 0)
        throw IndexError(path + ": zero dimension with nonzero row count");

    std::unordered_set<std::string> seen;
    index.ids_.reserve(rows);
    for (std::uint64_t i = 0; i < rows; ++i) {
        const std::uint32_t len = reader.u32();
        std::string id = reader.bytes(len, "id");
        if (!seen.insert(id).second)
            throw IndexError(path + ": duplicate id \"" + id + "\"");
        index.ids_.push_back(std::move(id));
    }
    index.vectors_.reserve(rows * index.dim_);
    for (std::uint64_t i = 0; i < rows * index.dim_; ++i) index.vectors_.push_back(reader.f32());
    if (!reader.done()) throw IndexError(path + ": trailing bytes after vector block");

    for (std::uint64_t i = 0; i < rows; ++i) {
        const float* row = index.vectors_.data() + i * index.dim_;
        double norm_sq = 0.0;
        for (std::size_t c = 0; c < index.dim_; ++c)
            norm_sq += static_cast<double>(row[c]) * static_cast<double>(row[c]);
        if (!std::isfinite(norm_sq) || std::abs(std::sqrt(norm_sq) - 1.0) > 1e-6)
            throw IndexError(path + ": row for id \"" + index.ids_[i] + "\" is not unit-norm");
    }
    return index;
}

}  // namespace codesearch
