#include "codesearch/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace codesearch {

namespace {

enum class CharClass { Lower, Upper, Digit, Other };

CharClass classify(unsigned char c) {
    if (c >= 'a' && c <= 'z') return CharClass::Lower;
    if (c >= 'A' && c <= 'Z') return CharClass::Upper;
    if (c >= '0' && c <= '9') return CharClass::Digit;
    return CharClass::Other;
}

bool is_letter(CharClass k) {
    return k == CharClass::Lower || k == CharClass::Upper;
}

}  // namespace

bool TokenBag::same_bag(const TokenBag& other) const {
    if (tokens.size() != other.tokens.size()) return false;
    return sorted_tokens() == other.sorted_tokens();
}

std::vector<std::string> TokenBag::sorted_tokens() const {
    std::vector<std::string> out = tokens;
    std::sort(out.begin(), out.end());
    return out;
}

std::string TokenBag::bag_key() const {
    std::string key;
    for (const std::string& t : sorted_tokens()) {
        key += t;
        key += '\x1f';
    }
    return key;
}

TokenBag tokenize(const std::string& text) {
    TokenBag bag;
    std::string current;
    CharClass prev = CharClass::Other;
    auto flush = [&] {
        if (!current.empty()) {
            bag.tokens.push_back(current);
            current.clear();
        }
    };
    for (unsigned char c : text) {
        CharClass k = classify(c);
        if (k == CharClass::Other) {
            flush();
        } else {
            bool boundary =
                (prev == CharClass::Lower && k == CharClass::Upper) ||
                (is_letter(prev) && k == CharClass::Digit) ||
                (prev == CharClass::Digit && is_letter(k));
            if (boundary) flush();
            current.push_back(static_cast<char>(std::tolower(c)));
        }
        prev = k;
    }
    flush();
    return bag;
}

namespace {

// "<" optional "/", identifier, anything but "<" up to ">".
bool contains_xml_tag(const std::string& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '<') continue;
        std::size_t j = i + 1;
        if (j < s.size() && s[j] == '/') ++j;
        if (j >= s.size() || !std::isalpha(static_cast<unsigned char>(s[j]))) continue;
        while (j < s.size() && s[j] != '<' && s[j] != '>') ++j;
        if (j < s.size() && s[j] == '>') return true;
    }
    return false;
}

std::string to_lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

bool filter_forum_pair(const std::string& title, const std::string& snippet) {
    if (contains_xml_tag(snippet)) return false;
    if (snippet.find('(') == std::string::npos) return false;
    const std::string lower_title = to_lower(title);
    for (const char* keyword : {"gradle", "studio", "emulator"})
        if (lower_title.find(keyword) != std::string::npos) return false;
    return true;
}

std::vector<SearchDocument> dedup(const std::vector<SearchDocument>& docs) {
    std::vector<SearchDocument> out;
    std::unordered_set<std::string> seen;
    for (const SearchDocument& doc : docs)
        if (seen.insert(doc.code.bag_key()).second) out.push_back(doc);
    return out;
}

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& msg) {
    std::ostringstream os;
    os << path << ":" << line << ": " << msg;
    throw CorpusError(os.str());
}

bool is_normalized_token(const std::string& token) {
    const TokenBag bag = tokenize(token);
    return bag.tokens.size() == 1 && bag.tokens[0] == token;
}

// A text field is either a raw string (tokenized here) or an array of
// already-normalized tokens.
struct TextField {
    TokenBag bag;
    std::string raw;
};

TextField parse_text_field(const json& record, const char* field,
                           const std::string& path, std::size_t line) {
    if (!record.contains(field))
        fail(path, line, std::string("missing required field \"") + field + "\"");
    const json& value = record.at(field);
    TextField out;
    if (value.is_string()) {
        out.raw = value.get<std::string>();
        out.bag = tokenize(out.raw);
    } else if (value.is_array()) {
        for (const json& item : value) {
            if (!item.is_string())
                fail(path, line, std::string("field \"") + field + "\": token array entries must be strings");
            const std::string token = item.get<std::string>();
            if (!is_normalized_token(token))
                fail(path, line, std::string("field \"") + field + "\": \"" + token + "\" is not a normalized token");
            out.bag.tokens.push_back(token);
            if (!out.raw.empty()) out.raw += ' ';
            out.raw += token;
        }
    } else {
        fail(path, line, std::string("field \"") + field + "\" must be a string or a token array");
    }
    return out;
}

std::string parse_id(const json& record, const std::string& path, std::size_t line) {
    if (!record.contains("id"))
        fail(path, line, "missing required field \"id\"");
    if (!record.at("id").is_string())
        fail(path, line, "field \"id\" must be a string");
    return record.at("id").get<std::string>();
}

template <typename Fn>
void for_each_record(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open corpus file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            fail(path, line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!record.is_object()) fail(path, line_no, "record must be a JSON object");
        fn(record, line_no);
    }
}

}  // namespace

std::vector<AlignedPair> load_aligned_corpus(const std::string& path) {
    std::vector<AlignedPair> pairs;
    for_each_record(path, [&](const json& record, std::size_t line_no) {
        AlignedPair pair;
        pair.id = parse_id(record, path, line_no);
        TextField code = parse_text_field(record, "code", path, line_no);
        TextField nl = parse_text_field(record, "nl", path, line_no);
        if (code.bag.empty()) fail(path, line_no, "field \"code\" tokenizes to an empty bag");
        if (nl.bag.empty()) fail(path, line_no, "field \"nl\" tokenizes to an empty bag");
        pair.code = std::move(code.bag);
        pair.raw_code = std::move(code.raw);
        pair.description = std::move(nl.bag);
        if (record.contains("url")) {
            if (!record.at("url").is_string())
                fail(path, line_no, "field \"url\" must be a string");
            pair.source_url = record.at("url").get<std::string>();
        }
        pairs.push_back(std::move(pair));
    });
    return pairs;
}

std::vector<SearchDocument> load_search_corpus(const std::string& path) {
    std::vector<SearchDocument> docs;
    std::unordered_set<std::string> ids;
    for_each_record(path, [&](const json& record, std::size_t line_no) {
        SearchDocument doc;
        doc.id = parse_id(record, path, line_no);
        if (!ids.insert(doc.id).second)
            fail(path, line_no, "duplicate document id \"" + doc.id + "\"");
        TextField code = parse_text_field(record, "code", path, line_no);
        if (code.bag.empty()) fail(path, line_no, "field \"code\" tokenizes to an empty bag");
        doc.code = std::move(code.bag);
        doc.raw_code = std::move(code.raw);
        docs.push_back(std::move(doc));
    });
    return docs;
}

std::vector<BenchmarkQuery> load_benchmark(const std::string& path) {
    std::vector<BenchmarkQuery> queries;
    std::unordered_set<std::string> ids;
    for_each_record(path, [&](const json& record, std::size_t line_no) {
        BenchmarkQuery q;
        q.id = parse_id(record, path, line_no);
        if (!ids.insert(q.id).second)
            fail(path, line_no, "duplicate query id \"" + q.id + "\"");
        TextField query = parse_text_field(record, "query", path, line_no);
        TextField truth = parse_text_field(record, "truth_code", path, line_no);
        if (truth.bag.empty())
            fail(path, line_no, "field \"truth_code\" tokenizes to an empty bag");
        q.query = std::move(query.bag);
        q.query_text = std::move(query.raw);
        q.truth = std::move(truth.bag);
        q.truth_raw = std::move(truth.raw);
        queries.push_back(std::move(q));
    });
    return queries;
}

}  // namespace codesearch
