#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "medtrust/corpus.hpp"
#include "medtrust/gateway.hpp"

namespace medtrust {

struct SelfAssessmentRound {
    int round_index = 0;
    Decoding decoding;
    std::string predicted;  // empty when the round failed
    bool correct = false;
    std::optional<std::string> error;
};

enum class DifficultyGroup { stable, medium, challenging };

const char* difficulty_group_name(DifficultyGroup group);

/// l = number of incorrect rounds out of k. l=0 -> stable (agreement with the
/// ground truth in every round), l=k -> challenging (never correct), anything
/// between -> medium.
struct DifficultyLabel {
    int incorrect_rounds = 0;
    DifficultyGroup group = DifficultyGroup::stable;
};

/// Named reliability dimensions carried by the self-evaluation prompt.
struct EvalCriteria {
    std::vector<std::string> criteria;

    static EvalCriteria defaults();  // hallucination, authenticity, completeness, reliability
    void validate() const;           // non-empty, unique names
};

/// k temperature/top-k/top-p settings, one per self-assessment round.
std::vector<Decoding> default_decoding_schedule(size_t k);

struct StratifyConfig {
    size_t k = 4;
    std::vector<Decoding> schedule;  // empty: default schedule of size k
    EvalCriteria criteria = EvalCriteria::defaults();
    size_t parallelism = 1;
};

struct QuestionAssessment {
    std::string q_id;
    std::vector<SelfAssessmentRound> rounds;
    DifficultyLabel label;
};

struct StratifiedCorpus {
    std::vector<std::string> stable;       // Q_s
    std::vector<std::string> medium;       // Q_m
    std::vector<std::string> challenging;  // Q_h
    std::vector<QuestionAssessment> assessments;
    std::vector<std::pair<std::string, std::string>> rejected;  // (q_id, reason)

    std::optional<DifficultyGroup> group_of(const std::string& q_id) const;
};

/// Run k assessment rounds against the endpoint. A round that fails at the
/// gateway is recorded as incorrect rather than retried forever.
std::vector<SelfAssessmentRound> run_self_assessment(const BenchmarkQuestion& question,
                                                     AgentGateway& gateway,
                                                     const AgentEndpoint& endpoint,
                                                     const StratifyConfig& config);

/// Pure function of the correctness vector; round order does not matter.
DifficultyLabel assess_difficulty(const std::vector<SelfAssessmentRound>& rounds);

/// Partition a question set into the three disjoint difficulty groups.
/// Questions that fail outright are quarantined, not dropped silently.
StratifiedCorpus stratify_corpus(const std::vector<BenchmarkQuestion>& questions,
                                 AgentGateway& gateway, const AgentEndpoint& endpoint,
                                 const StratifyConfig& config);

/// Line-delimited {q_id, rounds[], l, group} plus a reject file when needed.
void save_stratification(const StratifiedCorpus& corpus, const std::filesystem::path& out_path,
                         const std::filesystem::path& reject_path);
StratifiedCorpus load_stratification(const std::filesystem::path& path);

}  // namespace medtrust
