#pragma once

#include <optional>
#include <string>
#include <vector>

#include "medtrust/gateway.hpp"
#include "medtrust/retrieval.hpp"

namespace medtrust {

struct PipelineConfig {
    int t_max = 3;                     // retrieve-verify rounds
    size_t depth = 32;                 // evidence set size per round
    size_t verifier_view = 5;          // documents presented to the verifier
    bool enable_iteration = true;      // false: single round only
    bool enable_mtam_verifier = true;  // false: swap in the base-model verifier
};

struct RoundTrace {
    int iteration = 0;
    std::string query;
    std::vector<std::string> doc_ids;  // shown to the verifier this round
    std::string verifier_raw;
    std::string verdict_kind;          // cite_reason | nka | unparseable | no_evidence
    std::vector<std::string> gap_terms;
    std::string verifier_model;
};

enum class PipelineOutcome { validated, fallback };

struct IterationTrace {
    std::vector<RoundTrace> rounds;  // at most t_max
    PipelineOutcome outcome = PipelineOutcome::fallback;
};

struct AnswerRecord {
    std::string q_id;
    std::string predicted;  // option label; empty on error records
    std::string gold;
    IterationTrace trace;
    std::optional<Verdict> final_verdict;  // absent when the answer fell back
    std::optional<std::string> error;      // set when the question failed outright
};

struct PipelineEndpoints {
    AgentEndpoint verifier;
    std::optional<AgentEndpoint> base_verifier;  // required for the no-MTAM configuration
    AgentEndpoint generator;
};

/// Question text plus a single focus clause built from the gap terms.
/// Re-augmenting replaces any existing focus clause instead of stacking.
/// Throws empty_gap when the analysis carries no terms.
std::string augment_query(const std::string& question, const GapAnalysis& gap);

/// The retrieve -> verify -> refine loop. Each round retrieves fresh evidence
/// for the current query, shows the verifier a bounded view (documents
/// already judged insufficient are demoted below unseen ones), and either
/// hands validated reasoning to the generator or refines the query from the
/// gap analysis. After t_max failed rounds the generator answers from
/// parametric knowledge alone.
class Pipeline {
public:
    Pipeline(const HybridRetriever& retriever, AgentGateway& gateway, PipelineEndpoints endpoints,
             PipelineConfig config = {});

    AnswerRecord answer_question(const BenchmarkQuestion& question) const;

    /// Records come back in input order; a failing question yields an error
    /// record in place and the batch continues.
    std::vector<AnswerRecord> answer_batch(const std::vector<BenchmarkQuestion>& questions,
                                           size_t parallelism) const;

    const PipelineConfig& config() const { return config_; }

private:
    const HybridRetriever* retriever_;
    AgentGateway* gateway_;
    PipelineEndpoints endpoints_;
    PipelineConfig config_;
};

}  // namespace medtrust
