#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "medtrust/error.hpp"

namespace medtrust {

enum class Source { pubmed, statpearls, textbook, wikipedia, other };

Source source_from_string(const std::string& s);
const char* source_to_string(Source s);

/// One retrievable text unit.
struct Document {
    std::string doc_id;
    std::string title;  // may be empty
    std::string text;   // non-empty after ingestion
    Source source = Source::other;

    bool operator==(const Document&) const = default;
};

/// Multiple-choice question with exactly four options labelled A-D.
struct BenchmarkQuestion {
    std::string q_id;
    std::string question;
    std::map<std::string, std::string> options;  // A..D -> option text
    std::string gold;                            // one of the option labels
};

struct CorpusStats {
    int64_t doc_count = 0;
    int64_t total_tokens = 0;
    double avg_doc_len = 0.0;  // total_tokens / doc_count, 0 when empty
};

enum class CorpusFormat { jsonl };

/// Single-directory document store: an append-only `documents.jsonl` plus a
/// sidecar id->offset index that is rebuilt on open when missing. Read-only
/// after open; safe for concurrent readers.
class CorpusStore {
public:
    /// Validate and persist a whole corpus file into `store_dir`. Any
    /// malformed record, duplicate doc_id, or empty text rejects the batch.
    static CorpusStats ingest(const std::filesystem::path& input_path, CorpusFormat format,
                              const std::filesystem::path& store_dir);

    static CorpusStore open(const std::filesystem::path& store_dir);

    /// Build an in-memory store directly; used by fixtures and tests.
    static CorpusStore from_documents(std::vector<Document> docs);

    const Document& get_document(const std::string& doc_id) const;
    bool contains(const std::string& doc_id) const;

    const std::vector<Document>& documents() const { return docs_; }
    size_t size() const { return docs_.size(); }

    /// Recompute stats from the stored documents.
    CorpusStats stats() const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    CorpusStore() = default;

    std::filesystem::path dir_;
    std::vector<Document> docs_;
    std::unordered_map<std::string, size_t> by_id_;
};

/// Load a benchmark file: line-delimited {q_id, question, options{A..D}, gold}.
/// Order of the file is preserved.
std::vector<BenchmarkQuestion> load_benchmark(const std::filesystem::path& path);

}  // namespace medtrust
