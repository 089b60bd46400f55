#include "medtrust/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "medtrust/text.hpp"

namespace medtrust {

using nlohmann::json;

namespace {

constexpr const char* kDocumentsFile = "documents.jsonl";
constexpr const char* kOffsetsFile = "offsets.idx";

json parse_record(const std::string& line, size_t line_no) {
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
        throw Error(ErrorCode::malformed_record, "line " + std::to_string(line_no) + ": not a JSON object");
    }
    return rec;
}

std::string require_string(const json& rec, const char* key, size_t line_no) {
    auto it = rec.find(key);
    if (it == rec.end() || !it->is_string()) {
        throw Error(ErrorCode::malformed_record,
                    "line " + std::to_string(line_no) + ": missing string field '" + key + "'");
    }
    return it->get<std::string>();
}

Document parse_document(const std::string& line, size_t line_no) {
    json rec = parse_record(line, line_no);
    Document doc;
    doc.doc_id = require_string(rec, "doc_id", line_no);
    doc.title = require_string(rec, "title", line_no);
    doc.text = require_string(rec, "text", line_no);
    try {
        doc.source = source_from_string(require_string(rec, "source", line_no));
    } catch (const Error&) {
        throw Error(ErrorCode::malformed_record,
                    "line " + std::to_string(line_no) + ": unknown source for doc '" + doc.doc_id + "'");
    }
    if (doc.doc_id.empty()) {
        throw Error(ErrorCode::malformed_record, "line " + std::to_string(line_no) + ": empty doc_id");
    }
    return doc;
}

std::string document_to_line(const Document& doc) {
    json rec = {{"doc_id", doc.doc_id},
                {"title", doc.title},
                {"text", doc.text},
                {"source", source_to_string(doc.source)}};
    return rec.dump();
}

CorpusStats compute_stats(const std::vector<Document>& docs) {
    CorpusStats stats;
    stats.doc_count = static_cast<int64_t>(docs.size());
    for (const auto& doc : docs) {
        stats.total_tokens += static_cast<int64_t>(tokenize(doc.text).size());
    }
    stats.avg_doc_len = stats.doc_count > 0
                            ? static_cast<double>(stats.total_tokens) / static_cast<double>(stats.doc_count)
                            : 0.0;
    return stats;
}

}  // namespace

Source source_from_string(const std::string& s) {
    if (s == "pubmed") return Source::pubmed;
    if (s == "statpearls") return Source::statpearls;
    if (s == "textbook") return Source::textbook;
    if (s == "wikipedia") return Source::wikipedia;
    if (s == "other") return Source::other;
    throw Error(ErrorCode::malformed_record, "unknown source '" + s + "'");
}

const char* source_to_string(Source s) {
    switch (s) {
        case Source::pubmed: return "pubmed";
        case Source::statpearls: return "statpearls";
        case Source::textbook: return "textbook";
        case Source::wikipedia: return "wikipedia";
        case Source::other: return "other";
    }
    return "other";
}

CorpusStats CorpusStore::ingest(const std::filesystem::path& input_path, CorpusFormat format,
                                const std::filesystem::path& store_dir) {
    (void)format;  // jsonl is the only wire format
    std::ifstream in(input_path);
    if (!in) {
        throw Error(ErrorCode::malformed_record, "cannot open corpus file: " + input_path.string());
    }

    // Validate the whole batch before anything is written.
    std::vector<Document> docs;
    std::set<std::string> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        Document doc = parse_document(line, line_no);
        if (!seen.insert(doc.doc_id).second) {
            throw Error(ErrorCode::duplicate_doc_id, doc.doc_id);
        }
        if (doc.text.empty()) {
            throw Error(ErrorCode::empty_text, doc.doc_id);
        }
        docs.push_back(std::move(doc));
    }

    std::filesystem::create_directories(store_dir);
    std::ofstream out(store_dir / kDocumentsFile, std::ios::trunc | std::ios::binary);
    std::ofstream idx(store_dir / kOffsetsFile, std::ios::trunc | std::ios::binary);
    uint64_t offset = 0;
    for (const auto& doc : docs) {
        std::string rec = document_to_line(doc);
        out << rec << '\n';
        idx << offset << '\t' << doc.doc_id << '\n';
        offset += rec.size() + 1;
    }
    out.flush();
    idx.flush();

    return compute_stats(docs);
}

CorpusStore CorpusStore::open(const std::filesystem::path& store_dir) {
    auto docs_path = store_dir / kDocumentsFile;
    std::ifstream in(docs_path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::not_found, "store has no documents file: " + docs_path.string());
    }

    // The sidecar is authoritative when present; otherwise rebuild it from
    // a full scan of the append-only file.
    auto idx_path = store_dir / kOffsetsFile;
    std::vector<std::pair<uint64_t, std::string>> offsets;
    if (std::ifstream idx{idx_path}) {
        std::string line;
        while (std::getline(idx, line)) {
            if (line.empty()) continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos) {
                throw Error(ErrorCode::malformed_record, "corrupt offsets index: " + idx_path.string());
            }
            offsets.emplace_back(std::stoull(line.substr(0, tab)), line.substr(tab + 1));
        }
    } else {
        uint64_t offset = 0;
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!trim(line).empty()) {
                Document doc = parse_document(line, line_no);
                offsets.emplace_back(offset, doc.doc_id);
            }
            offset += line.size() + 1;
        }
        in.clear();
        std::ofstream rebuilt(idx_path, std::ios::trunc | std::ios::binary);
        for (const auto& [off, id] : offsets) rebuilt << off << '\t' << id << '\n';
    }

    CorpusStore store;
    store.dir_ = store_dir;
    store.docs_.reserve(offsets.size());
    size_t rec_no = 0;
    for (const auto& [off, id] : offsets) {
        in.seekg(static_cast<std::streamoff>(off));
        std::string line;
        if (!std::getline(in, line)) {
            throw Error(ErrorCode::not_found, "offset for doc '" + id + "' points past end of store");
        }
        Document doc = parse_document(line, ++rec_no);
        if (doc.doc_id != id) {
            throw Error(ErrorCode::malformed_record,
                        "offsets index out of sync: expected '" + id + "', found '" + doc.doc_id + "'");
        }
        store.by_id_.emplace(doc.doc_id, store.docs_.size());
        store.docs_.push_back(std::move(doc));
    }
    return store;
}

CorpusStore CorpusStore::from_documents(std::vector<Document> docs) {
    CorpusStore store;
    for (auto& doc : docs) {
        if (store.by_id_.count(doc.doc_id)) {
            throw Error(ErrorCode::duplicate_doc_id, doc.doc_id);
        }
        if (doc.text.empty()) {
            throw Error(ErrorCode::empty_text, doc.doc_id);
        }
        store.by_id_.emplace(doc.doc_id, store.docs_.size());
        store.docs_.push_back(std::move(doc));
    }
    return store;
}

const Document& CorpusStore::get_document(const std::string& doc_id) const {
    auto it = by_id_.find(doc_id);
    if (it == by_id_.end()) {
        throw Error(ErrorCode::not_found, doc_id);
    }
    return docs_[it->second];
}

bool CorpusStore::contains(const std::string& doc_id) const { return by_id_.count(doc_id) > 0; }

CorpusStats CorpusStore::stats() const { return compute_stats(docs_); }

std::vector<BenchmarkQuestion> load_benchmark(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::malformed_record, "cannot open benchmark file: " + path.string());
    }

    static const std::set<std::string> kLabels = {"A", "B", "C", "D"};

    std::vector<BenchmarkQuestion> questions;
    std::set<std::string> seen_ids;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json rec = parse_record(line, line_no);

        BenchmarkQuestion q;
        q.q_id = require_string(rec, "q_id", line_no);
        if (!seen_ids.insert(q.q_id).second) {
            throw Error(ErrorCode::malformed_record,
                        "line " + std::to_string(line_no) + ": duplicate q_id '" + q.q_id + "'");
        }
        q.question = require_string(rec, "question", line_no);

        auto opts = rec.find("options");
        if (opts == rec.end() || !opts->is_object() || opts->size() != 4) {
            throw Error(ErrorCode::malformed_record,
                        "line " + std::to_string(line_no) + ": options must be exactly four entries A-D");
        }
        for (const auto& [label, text] : opts->items()) {
            if (!kLabels.count(label) || !text.is_string()) {
                throw Error(ErrorCode::malformed_record,
                            "line " + std::to_string(line_no) + ": bad option label '" + label + "'");
            }
            q.options.emplace(label, text.get<std::string>());
        }

        auto gold = rec.find("gold");
        if (gold == rec.end() || !gold->is_string() || gold->get<std::string>().empty()) {
            throw Error(ErrorCode::missing_gold, "line " + std::to_string(line_no) + ": q_id " + q.q_id);
        }
        q.gold = gold->get<std::string>();
        if (!q.options.count(q.gold)) {
            throw Error(ErrorCode::bad_label, "line " + std::to_string(line_no) + ": gold '" + q.gold + "'");
        }
        questions.push_back(std::move(q));
    }
    return questions;
}

}  // namespace medtrust
