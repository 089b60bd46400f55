#include "medtrust/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "medtrust/text.hpp"

namespace medtrust {

using nlohmann::json;

void RankedList::validate() const {
    std::unordered_set<std::string> seen;
    for (size_t i = 0; i < entries.size(); ++i) {
        if (!seen.insert(entries[i].doc_id).second) {
            throw Error(ErrorCode::malformed_record,
                        "ranked list '" + retriever_id + "' repeats doc '" + entries[i].doc_id + "'");
        }
        if (i > 0 && entries[i].score > entries[i - 1].score) {
            throw Error(ErrorCode::malformed_record,
                        "ranked list '" + retriever_id + "' scores increase at rank " + std::to_string(i + 1));
        }
    }
}

SparseIndex SparseIndex::build(const CorpusStore& store) {
    if (store.size() == 0) {
        throw Error(ErrorCode::empty_corpus, "cannot index an empty store");
    }

    SparseIndex index;
    uint64_t total_len = 0;
    for (const auto& doc : store.documents()) {
        auto ordinal = static_cast<uint32_t>(index.doc_ids_.size());
        index.doc_ids_.push_back(doc.doc_id);

        std::map<std::string, uint32_t> tf;
        auto tokens = tokenize(doc.text);
        for (const auto& tok : tokens) ++tf[tok];

        index.doc_lens_.push_back(static_cast<uint32_t>(tokens.size()));
        total_len += tokens.size();
        for (const auto& [term, freq] : tf) {
            index.postings_[term].emplace_back(ordinal, freq);
        }
    }
    index.avg_doc_len_ = static_cast<double>(total_len) / static_cast<double>(index.doc_ids_.size());
    return index;
}

void SparseIndex::save(const std::filesystem::path& path) const {
    json out;
    out["doc_ids"] = doc_ids_;
    out["doc_lens"] = doc_lens_;
    out["avg_doc_len"] = avg_doc_len_;
    json postings = json::object();
    for (const auto& [term, plist] : postings_) {
        json arr = json::array();
        for (const auto& [ordinal, tf] : plist) arr.push_back({ordinal, tf});
        postings[term] = std::move(arr);
    }
    out["postings"] = std::move(postings);

    std::ofstream file(path, std::ios::trunc | std::ios::binary);
    if (!file) throw Error(ErrorCode::not_found, "cannot write index: " + path.string());
    file << out.dump() << '\n';
}

SparseIndex SparseIndex::load(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw Error(ErrorCode::not_found, "cannot open index: " + path.string());
    json in = json::parse(file, nullptr, false);
    if (in.is_discarded() || !in.is_object()) {
        throw Error(ErrorCode::malformed_record, "corrupt index file: " + path.string());
    }

    SparseIndex index;
    index.doc_ids_ = in.at("doc_ids").get<std::vector<std::string>>();
    index.doc_lens_ = in.at("doc_lens").get<std::vector<uint32_t>>();
    index.avg_doc_len_ = in.at("avg_doc_len").get<double>();
    for (const auto& [term, arr] : in.at("postings").items()) {
        auto& plist = index.postings_[term];
        for (const auto& pair : arr) {
            plist.emplace_back(pair.at(0).get<uint32_t>(), pair.at(1).get<uint32_t>());
        }
    }
    return index;
}

size_t SparseIndex::doc_frequency(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

RankedList SparseIndex::rank(const std::string& query, size_t top_n, const Bm25Params& params) const {
    RankedList result;
    result.retriever_id = "bm25";

    auto raw_terms = tokenize(query);
    std::vector<std::string> terms;  // deduplicated, first occurrence order
    std::unordered_set<std::string> seen;
    for (auto& t : raw_terms) {
        if (seen.insert(t).second) terms.push_back(std::move(t));
    }
    if (terms.empty()) return result;

    const double n_docs = static_cast<double>(doc_ids_.size());
    std::unordered_map<uint32_t, double> scores;
    for (const auto& term : terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double df = static_cast<double>(it->second.size());
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        for (const auto& [ordinal, tf] : it->second) {
            const double freq = static_cast<double>(tf);
            const double doc_len = static_cast<double>(doc_lens_[ordinal]);
            const double denom =
                freq + params.k1 * (1.0 - params.b + params.b * doc_len / avg_doc_len_);
            scores[ordinal] += idf * freq * (params.k1 + 1.0) / denom;
        }
    }

    result.entries.reserve(scores.size());
    for (const auto& [ordinal, score] : scores) {
        if (score > 0.0) result.entries.push_back({doc_ids_[ordinal], score});
    }
    std::sort(result.entries.begin(), result.entries.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (result.entries.size() > top_n) result.entries.resize(top_n);
    return result;
}

FusedRanking rrf_fuse(const std::vector<RankedList>& lists, double k_rrf) {
    if (lists.empty()) throw Error(ErrorCode::no_lists, "fusion needs at least one ranked list");
    if (!(k_rrf > 0.0)) throw Error(ErrorCode::config_error, "k_rrf must be positive");

    // Accumulate in list order so float sums match the reference exactly.
    std::unordered_map<std::string, double> accum;
    for (const auto& list : lists) {
        for (size_t rank = 0; rank < list.entries.size(); ++rank) {
            accum[list.entries[rank].doc_id] += 1.0 / (k_rrf + static_cast<double>(rank + 1));
        }
    }

    FusedRanking fused;
    fused.entries.reserve(accum.size());
    for (const auto& [doc_id, score] : accum) fused.entries.push_back({doc_id, score});
    std::sort(fused.entries.begin(), fused.entries.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    return fused;
}

HybridRetriever::HybridRetriever(const CorpusStore& store, const SparseIndex& index, RetrievalConfig config)
    : store_(&store), index_(&index), config_(config) {}

void HybridRetriever::add_dense_client(std::string retriever_id, DenseSearchFn search) {
    if (dense_clients_.size() >= 2) {
        throw Error(ErrorCode::config_error, "at most two dense retrievers are supported");
    }
    dense_clients_.emplace_back(std::move(retriever_id), std::move(search));
}

FusedRanking HybridRetriever::fuse(const std::string& query) const {
    std::vector<RankedList> lists;
    lists.push_back(index_->rank(query, config_.candidate_depth));

    for (const auto& [retriever_id, search] : dense_clients_) {
        RankedList list = search(query, config_.candidate_depth);
        list.validate();
        // Entries a dense service returns for documents this store does not
        // hold cannot be resolved; drop them before they distort ranks.
        RankedList known;
        known.retriever_id = list.retriever_id.empty() ? retriever_id : list.retriever_id;
        for (auto& entry : list.entries) {
            if (store_->contains(entry.doc_id)) known.entries.push_back(std::move(entry));
        }
        lists.push_back(std::move(known));
    }
    return rrf_fuse(lists, config_.k_rrf);
}

EvidenceSet HybridRetriever::retrieve(const std::string& query, int iteration) const {
    return retrieve(query, config_.depth, iteration);
}

EvidenceSet HybridRetriever::retrieve(const std::string& query, size_t depth, int iteration) const {
    FusedRanking fused = fuse(query);

    EvidenceSet evidence;
    evidence.query_text = query;
    evidence.iteration = iteration;
    for (const auto& entry : fused.entries) {
        if (evidence.docs.size() >= depth) break;
        evidence.docs.push_back(store_->get_document(entry.doc_id));
    }
    return evidence;
}

}  // namespace medtrust
