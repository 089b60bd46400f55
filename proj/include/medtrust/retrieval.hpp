#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "medtrust/corpus.hpp"

namespace medtrust {

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;

    bool operator==(const ScoredDoc&) const = default;
};

/// Output of a single retriever, descending by score, no duplicate ids.
struct RankedList {
    std::string retriever_id;
    std::vector<ScoredDoc> entries;

    void validate() const;  // throws on duplicates or increasing scores
};

/// Rank-fused result. Scores non-increasing; ties broken lexicographically
/// by doc_id so repeat runs are byte-identical.
struct FusedRanking {
    std::vector<ScoredDoc> entries;
};

/// Documents bound to a query at one pipeline iteration.
struct EvidenceSet {
    std::string query_text;
    int iteration = 0;
    std::vector<Document> docs;  // distinct, at most the configured depth
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Inverted index over a corpus store with BM25 ranking.
///
/// Scoring uses the non-negative IDF variant
///   idf = ln(1 + (N - df + 0.5) / (df + 0.5))
/// and term weight tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl)).
/// Query terms are deduplicated; repeating a term does not change ranks.
class SparseIndex {
public:
    /// Throws empty_corpus when the store holds no documents.
    static SparseIndex build(const CorpusStore& store);

    static SparseIndex load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    /// Top `top_n` documents by BM25 score; zero-score documents excluded;
    /// ties broken lexicographically by doc_id. Empty query yields an empty
    /// list.
    RankedList rank(const std::string& query, size_t top_n, const Bm25Params& params = {}) const;

    size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_len() const { return avg_doc_len_; }
    size_t doc_frequency(const std::string& term) const;

    bool operator==(const SparseIndex&) const = default;

private:
    std::vector<std::string> doc_ids_;                // ordinal -> id
    std::vector<uint32_t> doc_lens_;                  // ordinal -> token count
    double avg_doc_len_ = 0.0;
    // term -> postings (doc ordinal, term frequency), ordinals ascending
    std::map<std::string, std::vector<std::pair<uint32_t, uint32_t>>> postings_;
};

/// score(d) = sum over lists containing d of 1 / (k_rrf + rank_d), ranks
/// starting at 1. Accumulation follows list order so results are exactly
/// reproducible.
FusedRanking rrf_fuse(const std::vector<RankedList>& lists, double k_rrf);

using DenseSearchFn = std::function<RankedList(const std::string& query, size_t top_n)>;

struct RetrievalConfig {
    size_t depth = 32;            // evidence set size
    double k_rrf = 60.0;          // standard RRF constant
    size_t candidate_depth = 100; // per-retriever depth before fusion
};

/// Fuses the sparse index with up to two registered dense retrievers and
/// resolves the winners through the corpus store. With no dense clients it
/// degrades to BM25-only.
class HybridRetriever {
public:
    HybridRetriever(const CorpusStore& store, const SparseIndex& index, RetrievalConfig config = {});

    void add_dense_client(std::string retriever_id, DenseSearchFn search);

    /// The fused ranking over all registered retrievers, untruncated.
    FusedRanking fuse(const std::string& query) const;

    EvidenceSet retrieve(const std::string& query, int iteration = 0) const;
    EvidenceSet retrieve(const std::string& query, size_t depth, int iteration) const;

    const RetrievalConfig& config() const { return config_; }

private:
    const CorpusStore* store_;
    const SparseIndex* index_;
    RetrievalConfig config_;
    std::vector<std::pair<std::string, DenseSearchFn>> dense_clients_;
};

}  // namespace medtrust
