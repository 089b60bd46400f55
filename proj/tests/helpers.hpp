#pragma once

// Shared test utilities: deterministic RNG, temp dirs, mock-world builders,
// and independent oracles for fusion and BM25 scoring. Oracles are written
// straight from the score definitions and never call the code under test.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "medtrust/corpus.hpp"
#include "medtrust/gateway.hpp"
#include "medtrust/retrieval.hpp"

namespace testutil {

// xorshift64; avoids libstdc++-specific distribution behavior.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 1) {}
    uint64_t next() {
        state_ ^= state_ << 13;
        state_ ^= state_ >> 7;
        state_ ^= state_ << 17;
        return state_;
    }
    size_t below(size_t n) { return static_cast<size_t>(next() % n); }
    double unit() { return static_cast<double>(next() % 1000000) / 1000000.0; }

private:
    uint64_t state_;
};

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("medtrust_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------
// Brute-force reciprocal-rank-sum oracle.
// ---------------------------------------------------------------------------
inline std::vector<medtrust::ScoredDoc> rrf_oracle(const std::vector<medtrust::RankedList>& lists,
                                                   double k) {
    std::unordered_map<std::string, double> scores;
    for (const auto& list : lists) {
        for (size_t rank = 0; rank < list.entries.size(); ++rank) {
            scores[list.entries[rank].doc_id] += 1.0 / (k + static_cast<double>(rank + 1));
        }
    }
    std::vector<medtrust::ScoredDoc> result;
    result.reserve(scores.size());
    for (const auto& [id, score] : scores) result.push_back({id, score});
    std::sort(result.begin(), result.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    return result;
}

// ---------------------------------------------------------------------------
// BM25 oracle evaluated directly from the stated formula over raw token
// lists: idf = ln(1 + (N - df + 0.5)/(df + 0.5)),
// w = idf * tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl)).
// ---------------------------------------------------------------------------
inline std::map<std::string, double> bm25_oracle(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& docs,
    const std::vector<std::string>& query_terms, double k1 = 1.2, double b = 0.75) {
    const double n_docs = static_cast<double>(docs.size());
    double total_len = 0;
    for (const auto& [id, tokens] : docs) total_len += static_cast<double>(tokens.size());
    const double avg_len = total_len / n_docs;

    std::vector<std::string> terms;  // deduplicated
    for (const auto& t : query_terms) {
        if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
    }

    std::map<std::string, double> scores;
    for (const auto& term : terms) {
        double df = 0;
        for (const auto& [id, tokens] : docs) {
            if (std::find(tokens.begin(), tokens.end(), term) != tokens.end()) df += 1;
        }
        if (df == 0) continue;
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        for (const auto& [id, tokens] : docs) {
            double tf = 0;
            for (const auto& tok : tokens) {
                if (tok == term) tf += 1;
            }
            if (tf == 0) continue;
            const double dl = static_cast<double>(tokens.size());
            scores[id] += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avg_len));
        }
    }
    for (auto it = scores.begin(); it != scores.end();) {
        it = it->second > 0.0 ? std::next(it) : scores.erase(it);
    }
    return scores;
}

// ---------------------------------------------------------------------------
// Mock-world builder: a corpus store plus an incrementally scripted gateway.
// ---------------------------------------------------------------------------
struct MockWorld {
    medtrust::MockScript script;

    std::shared_ptr<medtrust::AgentGateway> gateway() const {
        return std::make_shared<medtrust::AgentGateway>(
            std::make_shared<medtrust::ScriptedMockTransport>(script));
    }
};

inline medtrust::AgentEndpoint mock_endpoint(medtrust::AgentRole role, const std::string& model) {
    medtrust::AgentEndpoint ep;
    ep.role = role;
    ep.base_url = "mock://";
    ep.model_name = model;
    ep.timeout_ms = 500;
    ep.max_retries = 0;
    ep.backoff_ms = 1;
    return ep;
}

inline medtrust::BenchmarkQuestion make_question(const std::string& q_id, const std::string& text,
                                                 const std::string& gold = "B") {
    medtrust::BenchmarkQuestion q;
    q.q_id = q_id;
    q.question = text;
    q.options = {{"A", "option alpha"}, {"B", "option beta"}, {"C", "option gamma"}, {"D", "option delta"}};
    q.gold = gold;
    return q;
}

}  // namespace testutil
