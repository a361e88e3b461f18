#include "codesearch/ncs.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "codesearch/kernels.hpp"

namespace codesearch {

IdfTable compute_idf(std::span<const TokenBag> corpus) {
    if (corpus.empty()) throw NcsError("cannot compute idf over an empty corpus");
    IdfTable table;
    table.corpus_size = corpus.size();
    std::unordered_map<std::string, std::size_t> df;
    std::unordered_map<std::string, std::size_t> seen_in;  // token -> last doc index + 1
    for (std::size_t doc = 0; doc < corpus.size(); ++doc) {
        for (const std::string& token : corpus[doc].tokens) {
            auto [it, inserted] = seen_in.emplace(token, doc + 1);
            if (!inserted) {
                if (it->second == doc + 1) continue;
                it->second = doc + 1;
            }
            ++df[token];
        }
    }
    const double n = static_cast<double>(table.corpus_size);
    table.values.reserve(df.size());
    for (const auto& [token, count] : df)
        table.values.emplace(token, std::log(n / static_cast<double>(count)));
    return table;
}

void save_idf(const IdfTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw NcsError("cannot open idf file for writing: " + path);
    out << nlohmann::json{{"N", table.corpus_size}}.dump() << '\n';
    std::map<std::string, double> sorted(table.values.begin(), table.values.end());
    for (const auto& [token, idf] : sorted)
        out << nlohmann::json{{"token", token}, {"idf", idf}}.dump() << '\n';
    if (!out) throw NcsError("failed writing idf file: " + path);
}

IdfTable load_idf(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NcsError("cannot open idf file: " + path);
    IdfTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    auto fail = [&](const std::string& msg) -> NcsError {
        return NcsError(path + ":" + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded()) throw fail("invalid JSON");
        if (!have_header) {
            if (!record.contains("N") || !record["N"].is_number_unsigned() ||
                record["N"].get<std::size_t>() == 0)
                throw fail("expected header record with positive \"N\"");
            table.corpus_size = record["N"].get<std::size_t>();
            have_header = true;
            continue;
        }
        if (!record.contains("token") || !record["token"].is_string())
            throw fail("record lacks string \"token\"");
        if (!record.contains("idf") || !record["idf"].is_number())
            throw fail("record lacks numeric \"idf\"");
        const std::string token = record["token"].get<std::string>();
        const double idf = record["idf"].get<double>();
        if (!std::isfinite(idf) || idf < 0.0) throw fail("idf out of range for \"" + token + "\"");
        if (!table.values.emplace(token, idf).second)
            throw fail("duplicate token \"" + token + "\"");
    }
    if (!have_header) throw NcsError(path + ": missing header record");
    return table;
}

namespace {

// Sorted unique tokens with their in-bag counts; fixes the summation order.
std::map<std::string, std::size_t> token_counts(const TokenBag& bag) {
    std::map<std::string, std::size_t> counts;
    for (const std::string& token : bag.tokens) ++counts[token];
    return counts;
}

}  // namespace

std::vector<double> embed_code_ncs(const TokenBag& code, const EmbeddingMatrix& matrix,
                                   const IdfTable& idf) {
    std::vector<double> pooled(matrix.dim, 0.0);
    std::size_t known = 0;
    std::size_t weighted = 0;
    for (const auto& [token, tf] : token_counts(code)) {
        const double* row = matrix.find_row(token);
        if (!row) continue;
        ++known;
        const double weight = static_cast<double>(tf) * idf.find(token);
        if (weight == 0.0) continue;
        ++weighted;
        kernels::axpy(weight, row, pooled.data(), matrix.dim);
    }
    if (weighted == 0) {
        if (known == 0)
            throw AllTokensUnweightedError("no token of the snippet is covered by the embedding matrix");
        throw AllTokensUnweightedError("every known token of the snippet has zero tf-idf weight");
    }
    return pooled;
}

std::vector<double> embed_query_ncs(const TokenBag& query, const EmbeddingMatrix& matrix) {
    std::vector<double> pooled(matrix.dim, 0.0);
    std::size_t known = 0;
    for (const auto& [token, count] : token_counts(query)) {
        const double* row = matrix.find_row(token);
        if (!row) continue;
        known += count;
        kernels::axpy(static_cast<double>(count), row, pooled.data(), matrix.dim);
    }
    if (known == 0)
        throw NoKnownTokensError("no token of the query is covered by the embedding matrix");
    kernels::scale(pooled.data(), 1.0 / static_cast<double>(known), matrix.dim);
    return pooled;
}

std::optional<std::vector<double>> NcsEmbedder::embed_code(const TokenBag& code) const {
    try {
        return embed_code_ncs(code, matrix_, idf_);
    } catch (const AllTokensUnweightedError&) {
        return std::nullopt;
    }
}

std::optional<std::vector<double>> NcsEmbedder::embed_query(const TokenBag& query) const {
    try {
        return embed_query_ncs(query, matrix_);
    } catch (const NoKnownTokensError&) {
        return std::nullopt;
    }
}

}  // namespace codesearch
