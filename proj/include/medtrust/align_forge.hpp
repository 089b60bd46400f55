#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medtrust/corpus.hpp"
#include "medtrust/gateway.hpp"
#include "medtrust/medrank.hpp"
#include "medtrust/pipeline.hpp"
#include "medtrust/retrieval.hpp"

namespace medtrust {

/// Five documents with per-document entailment labels and the resulting
/// composition tag (n_entail, n_not_entail).
struct ComposedDocSet {
    std::string q_id;
    std::vector<std::string> doc_ids;  // exactly 5
    std::vector<NliLabel> labels;      // aligned with doc_ids
    int n_entail = 0;
    int n_not_entail = 0;
};

enum class HallucinationCategory { faulty_reasoning, missing_answer, over_refusal, misattribution };

const char* hallucination_category_name(HallucinationCategory category);
HallucinationCategory hallucination_category_from_name(const std::string& name);

/// Oracle outcomes recorded at construction time. Each category's defining
/// predicate can be re-checked from these fields alone.
struct NegativeEvidence {
    std::optional<NliLabel> nli_label;                  // reasoning vs doc-set entailment
    std::optional<std::string> answer_with_reasoning;   // generator answer given the draft
    std::optional<std::string> answer_parametric;       // generator answer with no reasoning
    std::optional<double> similarity;                   // distractor-set similarity
    std::optional<double> delta;                        // threshold in force
    std::vector<std::string> source_doc_ids;            // original set for misattribution
};

struct NegativeSample {
    std::string q_id;
    std::vector<std::string> doc_ids;  // prompt context (the distractor set for misattribution)
    Verdict verdict;                   // the rejected content
    HallucinationCategory category = HallucinationCategory::faulty_reasoning;
    NegativeEvidence evidence;
    std::string drafter_model;
};

/// True when the recorded evidence still satisfies the category's predicate.
bool revalidate(const NegativeSample& sample);

struct PositiveSample {
    std::string q_id;
    std::vector<std::string> doc_ids;
    Verdict verdict;  // verified reasoning, or a legitimate refusal
    std::string drafter_model;
};

struct PreferencePair {
    std::string q_id;
    std::string question;
    std::map<std::string, std::string> options;
    std::vector<std::string> doc_ids;
    Verdict chosen;
    Verdict rejected;
    HallucinationCategory category = HallucinationCategory::faulty_reasoning;
    std::string provenance_chosen;
    std::string provenance_rejected;
};

struct ForgeEndpoints {
    AgentEndpoint primary_drafter;
    AgentEndpoint alt_drafter;
    AgentEndpoint generator;  // frozen answer model
    AgentEndpoint nli;
    AgentEndpoint embedder;
};

struct ForgeConfig {
    double delta = 0.8;           // misattribution similarity threshold
    size_t candidate_depth = 10;  // retrieval depth feeding composition, >= 5
    size_t distractor_set_size = 5;
    size_t parallelism = 1;
};

struct ForgeManifest {
    std::map<std::string, size_t> pairs_per_category;
    std::map<std::string, size_t> negatives_per_group;  // difficulty group -> count
    size_t positives_cite_reason = 0;
    size_t positives_nka = 0;
    size_t negatives_total = 0;
    size_t pairs_total = 0;
    size_t unpairable = 0;
    double delta = 0.0;
    std::map<std::string, std::string> endpoints;  // role -> model id
};

struct ForgeOutput {
    std::vector<PositiveSample> positives;
    std::vector<NegativeSample> negatives;
    std::vector<PreferencePair> pairs;
    ForgeManifest manifest;
    std::vector<std::string> log;  // quarantines, skips, unpairable samples
};

/// Hypothesis text used for answer-support entailment checks.
std::string nli_hypothesis(const BenchmarkQuestion& question, const std::string& label);

/// Builds the preference training corpus: entailment-guided document
/// composition, drafted and verified positive verdicts, and the four
/// hallucination-aware negative constructors.
class AlignForge {
public:
    AlignForge(const CorpusStore& store, AgentGateway& gateway, ForgeEndpoints endpoints,
               ForgeConfig config = {});

    /// One subset per achievable composition from (5,0) down to (0,5),
    /// filled by candidate rank within each label class. Requires at least
    /// five candidates.
    std::vector<ComposedDocSet> compose_document_sets(const BenchmarkQuestion& question,
                                                      const EvidenceSet& candidates) const;

    /// Drafted verdict, or nullopt (quarantined) when unparseable.
    std::optional<Verdict> draft(const AgentEndpoint& drafter, const BenchmarkQuestion& question,
                                 const std::vector<Document>& docs) const;

    /// True when the frozen generator answers the gold label given the
    /// reasoning. Gateway failures count as unverified.
    bool verify_positive(const BenchmarkQuestion& question, const Verdict& reasoning) const;

    std::optional<NegativeSample> build_faulty_reasoning(const BenchmarkQuestion& question,
                                                         const std::vector<Document>& docs) const;

    /// Only stable-group questions whose parametric answer is (re-checked)
    /// correct are eligible.
    std::optional<NegativeSample> build_missing_answer(const BenchmarkQuestion& question,
                                                       std::optional<DifficultyGroup> group,
                                                       const std::vector<Document>& docs) const;

    std::optional<NegativeSample> build_over_refusal(const BenchmarkQuestion& question,
                                                     const std::vector<Document>& docs) const;

    /// Mean over distractors of the max cosine against the source set.
    double set_similarity(const std::vector<Document>& source,
                          const std::vector<Document>& distractors) const;

    std::optional<NegativeSample> build_misattribution(const BenchmarkQuestion& question,
                                                       const std::vector<Document>& docs,
                                                       const Verdict& reasoning) const;

    /// Full per-question construction over retrieved candidates.
    ForgeOutput run(const std::vector<BenchmarkQuestion>& questions, const StratifiedCorpus& groups,
                    const HybridRetriever& retriever) const;

    const ForgeConfig& config() const { return config_; }
    const ForgeEndpoints& endpoints() const { return endpoints_; }

    std::vector<Document> resolve(const std::vector<std::string>& doc_ids) const;

private:
    const CorpusStore* store_;
    AgentGateway* gateway_;
    ForgeEndpoints endpoints_;
    ForgeConfig config_;
};

struct PairingPolicy {
    size_t max_pairs_per_category_per_question = 1;
};

/// Match positives and negatives of the same question into preference pairs,
/// one per hallucination category by default, preferring a positive built
/// over the same document set. Samples that cannot be paired are logged.
ForgeOutput emit_preference_corpus(std::vector<PositiveSample> positives,
                                   std::vector<NegativeSample> negatives,
                                   const std::vector<BenchmarkQuestion>& questions,
                                   const StratifiedCorpus& groups, const ForgeEndpoints& endpoints,
                                   double delta, const PairingPolicy& policy = {});

void save_preference_corpus(const ForgeOutput& output, const std::filesystem::path& corpus_path,
                            const std::filesystem::path& manifest_path);

}  // namespace medtrust
