#include "secda_dse/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

namespace secda_dse {

namespace {

DocumentKind kind_for(const std::filesystem::path& relative) {
    const auto top = relative.begin()->string();
    if (top == "templates") return DocumentKind::template_definition;
    if (top == "api") return DocumentKind::api_doc;
    return DocumentKind::code_fragment;
}

DocumentKind kind_from_string(const std::string& text) {
    if (text == "code_fragment") return DocumentKind::code_fragment;
    if (text == "template_definition") return DocumentKind::template_definition;
    if (text == "api_doc") return DocumentKind::api_doc;
    throw ParseError("unknown document kind '" + text + "'");
}

struct FileStat {
    std::string path;
    std::uintmax_t size;
    std::int64_t mtime;
};

std::vector<FileStat> scan_corpus(const std::filesystem::path& corpus_dir) {
    std::vector<FileStat> stats;
    std::error_code ec;
    if (!std::filesystem::is_directory(corpus_dir, ec)) {
        throw StorageError("corpus directory not readable: " + corpus_dir.string());
    }
    for (std::filesystem::recursive_directory_iterator it(corpus_dir, ec), end; it != end; it.increment(ec)) {
        if (ec) throw StorageError("cannot scan corpus: " + ec.message());
        if (!it->is_regular_file()) continue;
        const auto relative = it->path().lexically_relative(corpus_dir).generic_string();
        const auto mtime = it->last_write_time().time_since_epoch().count();
        stats.push_back({relative, it->file_size(), static_cast<std::int64_t>(mtime)});
    }
    std::sort(stats.begin(), stats.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    return stats;
}

Json stats_json(const std::vector<FileStat>& stats) {
    Json out = Json::array();
    for (const auto& s : stats) out.push_back(Json{{"path", s.path}, {"size", s.size}, {"mtime", s.mtime}});
    return out;
}

}  // namespace

std::string to_string(DocumentKind kind) {
    switch (kind) {
        case DocumentKind::code_fragment: return "code_fragment";
        case DocumentKind::template_definition: return "template_definition";
        case DocumentKind::api_doc: return "api_doc";
    }
    return "unknown";
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::size_t whitespace_token_count(const std::string& text) {
    std::istringstream in(text);
    std::size_t count = 0;
    std::string word;
    while (in >> word) ++count;
    return count;
}

RetrievalIndex::RetrievalIndex(std::vector<CorpusDocument> documents) {
    std::size_t total_length = 0;
    for (auto& doc : documents) {
        const auto tokens = tokenize(doc.text);
        for (const auto& t : tokens) ++postings_[t][doc.doc_id];
        lengths_[doc.doc_id] = tokens.size();
        total_length += tokens.size();
        const auto id = doc.doc_id;
        if (!documents_.emplace(id, std::move(doc)).second) throw StorageError("duplicate doc_id " + id);
    }
    average_length_ = documents_.empty() ? 0.0 : static_cast<double>(total_length) / documents_.size();
}

std::size_t RetrievalIndex::length_of(const std::string& doc_id) const {
    auto it = lengths_.find(doc_id);
    return it == lengths_.end() ? 0 : it->second;
}

double RetrievalIndex::idf(const std::string& term) const {
    const auto it = postings_.find(term);
    const double containing = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
    const double n = static_cast<double>(documents_.size());
    return std::log(1.0 + (n - containing + 0.5) / (containing + 0.5));
}

std::vector<ScoredDocument> RetrievalIndex::retrieve(const std::string& query, std::size_t k) const {
    if (k == 0 || documents_.empty()) return {};

    const auto terms = tokenize(query);
    const std::set<std::string> unique_terms(terms.begin(), terms.end());

    std::map<std::string, double> scores;
    for (const auto& term : unique_terms) {
        const auto posting = postings_.find(term);
        if (posting == postings_.end()) continue;
        const double weight = idf(term);
        for (const auto& [doc_id, tf] : posting->second) {
            const double freq = static_cast<double>(tf);
            const double length_ratio = static_cast<double>(length_of(doc_id)) / average_length_;
            scores[doc_id] += weight * freq * (kBm25K1 + 1.0) / (freq + kBm25K1 * (1.0 - kBm25B + kBm25B * length_ratio));
        }
    }

    std::vector<ScoredDocument> ranked;
    ranked.reserve(scores.size());
    for (const auto& [doc_id, score] : scores) ranked.push_back({doc_id, score});
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
}

RetrievalIndex build_index(const std::filesystem::path& corpus_dir) {
    std::vector<CorpusDocument> docs;
    for (const auto& stat : scan_corpus(corpus_dir)) {
        CorpusDocument doc;
        doc.doc_id = stat.path;
        doc.kind = kind_for(std::filesystem::path(stat.path));
        doc.text = read_text_file(corpus_dir / stat.path);
        doc.token_count = whitespace_token_count(doc.text);
        docs.push_back(std::move(doc));
    }
    return RetrievalIndex(std::move(docs));
}

RetrievalIndex load_index_cache(const std::filesystem::path& cache_file) {
    const Json cache = read_json_file(cache_file);
    std::vector<CorpusDocument> docs;
    for (const auto& entry : cache.at("documents")) {
        CorpusDocument doc;
        doc.doc_id = entry.at("doc_id").get<std::string>();
        doc.kind = kind_from_string(entry.at("kind").get<std::string>());
        doc.text = entry.at("text").get<std::string>();
        doc.token_count = entry.at("token_count").get<std::size_t>();
        docs.push_back(std::move(doc));
    }
    return RetrievalIndex(std::move(docs));
}

RetrievalIndex load_or_build_index(const std::filesystem::path& corpus_dir, const std::filesystem::path& cache_file) {
    const auto stats = scan_corpus(corpus_dir);
    const Json current_stats = stats_json(stats);

    if (std::filesystem::exists(cache_file)) {
        try {
            const Json cache = read_json_file(cache_file);
            if (cache.value("files", Json()) == current_stats) return load_index_cache(cache_file);
        } catch (const std::exception&) {
            // unreadable cache: rebuild below
        }
    }

    auto index = build_index(corpus_dir);
    Json documents = Json::array();
    for (const auto& [id, doc] : index.documents()) {
        documents.push_back(
            Json{{"doc_id", id}, {"kind", to_string(doc.kind)}, {"text", doc.text}, {"token_count", doc.token_count}});
    }
    write_json_file(cache_file, Json{{"corpus_dir", std::filesystem::absolute(corpus_dir).lexically_normal().string()},
                                     {"files", current_stats},
                                     {"documents", documents}});
    return index;
}

std::vector<CorpusDocument> trim_to_budget(const std::vector<ScoredDocument>& results, const RetrievalIndex& index,
                                           std::size_t budget_tokens) {
    std::vector<CorpusDocument> selected;
    std::size_t used = 0;
    for (const auto& hit : results) {
        auto it = index.documents().find(hit.doc_id);
        if (it == index.documents().end()) continue;
        if (used + it->second.token_count > budget_tokens) break;
        used += it->second.token_count;
        selected.push_back(it->second);
    }
    return selected;
}

}  // namespace secda_dse
