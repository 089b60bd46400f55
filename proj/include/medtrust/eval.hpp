#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "medtrust/align_forge.hpp"
#include "medtrust/corpus.hpp"
#include "medtrust/gateway.hpp"
#include "medtrust/pipeline.hpp"

namespace medtrust {

/// Case-insensitive option-label equality.
bool exact_match(const std::string& predicted, const std::string& gold);

struct EvalRow {
    std::string q_id;
    std::string predicted;
    std::string gold;
    bool correct = false;
    int rounds_used = 0;
    std::string outcome;  // validated | fallback | error
};

struct EvalReport {
    std::string dataset;
    size_t n = 0;
    double em = 0.0;  // mean of per-question correctness
    std::vector<EvalRow> per_question;
};

struct BenchmarkRun {
    EvalReport report;
    std::vector<AnswerRecord> records;
};

/// Aggregate exact match over answer records. Failed questions count as
/// incorrect and keep their error flag in the row's outcome.
EvalReport evaluate_records(const std::string& dataset, const std::vector<AnswerRecord>& records);

/// answer_batch over the benchmark, then aggregate. Throws empty_benchmark.
BenchmarkRun run_benchmark(const std::string& dataset, const std::vector<BenchmarkQuestion>& benchmark,
                           const Pipeline& pipeline, size_t parallelism);

nlohmann::json eval_report_to_json(const EvalReport& report);
void save_eval_report(const EvalReport& report, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Hallucination audit
// ---------------------------------------------------------------------------

struct AuditOracles {
    AgentEndpoint nli;
    AgentEndpoint generator;
};

/// Per-record audit outcome; the report's counts are recomputable from these.
struct AuditRow {
    std::string q_id;
    std::string verdict_kind;  // cite_reason | nka | none
    bool faulty_reasoning = false;
    bool missing_answer = false;
    bool over_refusal = false;
    bool misattribution = false;
    bool unauditable = false;
    std::string note;
};

struct CategoryStat {
    size_t count = 0;
    size_t denominator = 0;
    double proportion = 0.0;  // 0 when the denominator is empty
    std::string denominator_definition;
};

struct HallucinationReport {
    size_t n_records = 0;
    size_t n_audited = 0;
    size_t n_unauditable = 0;
    std::map<std::string, CategoryStat> categories;
    std::vector<AuditRow> per_record;
};

/// Audit final verdicts against the evidence that was shown:
///  - faulty reasoning: some statement is not entailed by its cited
///    documents and by no other shown document;
///  - misattribution: a statement's cited documents do not entail it but
///    another shown document does (takes precedence over faulty reasoning
///    for that statement);
///  - missing answer: reasoning was validated yet the answer model cannot
///    recover the gold label from it;
///  - over-refusal: the verdict is a refusal although the shown documents
///    entail question plus gold answer.
/// Records whose oracles fail are excluded and reported as unauditable.
HallucinationReport audit_hallucinations(const std::vector<AnswerRecord>& records,
                                         const std::vector<BenchmarkQuestion>& benchmark,
                                         const CorpusStore& store, AgentGateway& gateway,
                                         const AuditOracles& oracles, size_t parallelism = 1);

nlohmann::json hallucination_report_to_json(const HallucinationReport& report);
void save_hallucination_report(const HallucinationReport& report, const std::filesystem::path& path);

}  // namespace medtrust
