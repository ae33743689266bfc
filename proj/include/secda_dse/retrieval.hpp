#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "secda_dse/json_util.hpp"

namespace secda_dse {

enum class DocumentKind { code_fragment, template_definition, api_doc };

std::string to_string(DocumentKind kind);

struct CorpusDocument {
    std::string doc_id;  // path relative to the corpus root
    DocumentKind kind = DocumentKind::code_fragment;
    std::string text;
    std::size_t token_count = 0;  // whitespace-delimited words

    bool operator==(const CorpusDocument&) const = default;
};

struct ScoredDocument {
    std::string doc_id;
    double score = 0.0;
};

// Okapi BM25 parameters.
inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;

/// Lowercase, split on anything that is not [a-z0-9].
std::vector<std::string> tokenize(const std::string& text);
std::size_t whitespace_token_count(const std::string& text);

class RetrievalIndex {
public:
    RetrievalIndex() = default;
    explicit RetrievalIndex(std::vector<CorpusDocument> documents);

    std::size_t document_count() const { return documents_.size(); }
    double average_length() const { return average_length_; }

    const std::map<std::string, CorpusDocument>& documents() const { return documents_; }
    const std::map<std::string, std::map<std::string, std::size_t>>& postings() const { return postings_; }
    std::size_t length_of(const std::string& doc_id) const;

    double idf(const std::string& term) const;

    std::vector<ScoredDocument> retrieve(const std::string& query, std::size_t k) const;

    bool operator==(const RetrievalIndex&) const = default;

private:
    std::map<std::string, CorpusDocument> documents_;
    std::map<std::string, std::map<std::string, std::size_t>> postings_;  // term -> doc_id -> tf
    std::map<std::string, std::size_t> lengths_;                          // analysed token count
    double average_length_ = 0.0;
};

/// One document per regular file; kind comes from the top-level directory
/// (code/, templates/, api/), anything else is treated as a code fragment.
RetrievalIndex build_index(const std::filesystem::path& corpus_dir);

/// Reuses `cache_file` when every file's size and mtime still match,
/// otherwise rebuilds and rewrites it.
RetrievalIndex load_or_build_index(const std::filesystem::path& corpus_dir, const std::filesystem::path& cache_file);

// Loads the documents stored in a cache file without checking the corpus.
RetrievalIndex load_index_cache(const std::filesystem::path& cache_file);

/// Greedy prefix of the ranking whose cumulative token_count fits the budget;
/// stops at the first document that does not fit.
std::vector<CorpusDocument> trim_to_budget(const std::vector<ScoredDocument>& results, const RetrievalIndex& index,
                                           std::size_t budget_tokens);

inline std::vector<ScoredDocument> retrieve(const RetrievalIndex& index, const std::string& query, std::size_t k) {
    return index.retrieve(query, k);
}

}  // namespace secda_dse
