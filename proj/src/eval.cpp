#include "medtrust/eval.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <unordered_map>

#include "medtrust/parallel.hpp"

namespace medtrust {

using nlohmann::json;

bool exact_match(const std::string& predicted, const std::string& gold) {
    if (predicted.size() != gold.size()) return false;
    for (size_t i = 0; i < predicted.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(predicted[i])) !=
            std::tolower(static_cast<unsigned char>(gold[i])))
            return false;
    }
    return !predicted.empty();
}

EvalReport evaluate_records(const std::string& dataset, const std::vector<AnswerRecord>& records) {
    EvalReport report;
    report.dataset = dataset;
    report.n = records.size();

    size_t correct = 0;
    for (const auto& record : records) {
        EvalRow row;
        row.q_id = record.q_id;
        row.predicted = record.predicted;
        row.gold = record.gold;
        row.rounds_used = static_cast<int>(record.trace.rounds.size());
        row.outcome = record.error ? "error"
                      : record.trace.outcome == PipelineOutcome::validated ? "validated"
                                                                           : "fallback";
        row.correct = !record.error && exact_match(record.predicted, record.gold);
        if (row.correct) ++correct;
        report.per_question.push_back(std::move(row));
    }
    report.em = records.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(records.size());
    return report;
}

BenchmarkRun run_benchmark(const std::string& dataset, const std::vector<BenchmarkQuestion>& benchmark,
                           const Pipeline& pipeline, size_t parallelism) {
    if (benchmark.empty()) throw Error(ErrorCode::empty_benchmark, dataset);
    BenchmarkRun run;
    run.records = pipeline.answer_batch(benchmark, parallelism);
    run.report = evaluate_records(dataset, run.records);
    return run;
}

json eval_report_to_json(const EvalReport& report) {
    json rows = json::array();
    for (const auto& row : report.per_question) {
        rows.push_back({{"q_id", row.q_id},
                        {"predicted", row.predicted},
                        {"gold", row.gold},
                        {"correct", row.correct},
                        {"rounds_used", row.rounds_used},
                        {"outcome", row.outcome}});
    }
    return json{{"dataset", report.dataset}, {"n", report.n}, {"em", report.em}, {"per_question", rows}};
}

void save_eval_report(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error(ErrorCode::not_found, "cannot write report: " + path.string());
    out << eval_report_to_json(report).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Hallucination audit
// ---------------------------------------------------------------------------

namespace {

// The verdict a record is audited on: validated records carry it directly;
// fallback records whose last round was a refusal are audited as refusals.
struct Auditee {
    std::optional<Verdict> verdict;
    std::vector<std::string> shown_ids;
    std::string skip_reason;
};

Auditee auditee_of(const AnswerRecord& record) {
    Auditee a;
    if (record.error) {
        a.skip_reason = "question failed: " + *record.error;
        return a;
    }
    if (record.trace.rounds.empty()) {
        a.skip_reason = "no rounds recorded";
        return a;
    }
    const RoundTrace& last = record.trace.rounds.back();
    a.shown_ids = last.doc_ids;
    if (record.final_verdict) {
        a.verdict = record.final_verdict;
    } else if (last.verdict_kind == "nka") {
        a.verdict = Verdict::nka();
    } else {
        a.skip_reason = "no auditable verdict (last round: " + last.verdict_kind + ")";
    }
    return a;
}

}  // namespace

HallucinationReport audit_hallucinations(const std::vector<AnswerRecord>& records,
                                         const std::vector<BenchmarkQuestion>& benchmark,
                                         const CorpusStore& store, AgentGateway& gateway,
                                         const AuditOracles& oracles, size_t parallelism) {
    std::unordered_map<std::string, const BenchmarkQuestion*> questions;
    for (const auto& q : benchmark) questions.emplace(q.q_id, &q);

    auto audit_one = [&](size_t index) -> AuditRow {
        const AnswerRecord& record = records[index];
        AuditRow row;
        row.q_id = record.q_id;
        row.verdict_kind = "none";

        auto question_it = questions.find(record.q_id);
        Auditee auditee = auditee_of(record);
        if (!auditee.skip_reason.empty() || question_it == questions.end()) {
            row.unauditable = true;
            row.note = auditee.skip_reason.empty() ? "question not in benchmark" : auditee.skip_reason;
            return row;
        }
        const BenchmarkQuestion& question = *question_it->second;

        try {
            std::vector<Document> shown;
            shown.reserve(auditee.shown_ids.size());
            for (const auto& id : auditee.shown_ids) shown.push_back(store.get_document(id));

            if (auditee.verdict->is_cite_reason()) {
                row.verdict_kind = "cite_reason";

                for (const auto& stmt : auditee.verdict->cite_reason().statements) {
                    std::set<int> cited(stmt.citations.begin(), stmt.citations.end());
                    std::vector<std::string> cited_texts;
                    for (int idx : cited) {
                        if (idx < 1 || static_cast<size_t>(idx) > shown.size()) {
                            throw Error(ErrorCode::citation_out_of_range, std::to_string(idx));
                        }
                        cited_texts.push_back(shown[static_cast<size_t>(idx - 1)].text);
                    }
                    if (gateway.call_nli(oracles.nli, cited_texts, stmt.text) == NliLabel::entail) {
                        continue;
                    }
                    // Cited documents fail; does any other shown document
                    // support the statement? That distinguishes a wrong
                    // citation from reasoning no evidence supports.
                    bool supported_elsewhere = false;
                    for (size_t d = 0; d < shown.size() && !supported_elsewhere; ++d) {
                        if (cited.count(static_cast<int>(d + 1))) continue;
                        supported_elsewhere =
                            gateway.call_nli(oracles.nli, {shown[d].text}, stmt.text) == NliLabel::entail;
                    }
                    if (supported_elsewhere) {
                        row.misattribution = true;
                    } else {
                        row.faulty_reasoning = true;
                    }
                }

                std::string recovered =
                    gateway.call_generator(oracles.generator, question, auditee.verdict);
                if (!exact_match(recovered, question.gold)) row.missing_answer = true;
            } else {
                row.verdict_kind = "nka";
                if (!shown.empty()) {
                    std::vector<std::string> shown_texts;
                    for (const auto& doc : shown) shown_texts.push_back(doc.text);
                    if (gateway.call_nli(oracles.nli, shown_texts,
                                         nli_hypothesis(question, question.gold)) == NliLabel::entail) {
                        row.over_refusal = true;
                    }
                }
            }
        } catch (const std::exception& e) {
            // An oracle failure removes the record from every denominator.
            row = AuditRow{};
            row.q_id = record.q_id;
            row.verdict_kind = "none";
            row.unauditable = true;
            row.note = e.what();
        }
        return row;
    };

    // Records audit independently; the report is reduced in input order.
    std::vector<AuditRow> rows =
        parallel_map<AuditRow>(records.size(), parallelism, audit_one);

    HallucinationReport report;
    report.n_records = records.size();
    size_t cite_records = 0;
    size_t nka_records = 0;
    for (auto& row : rows) {
        if (row.unauditable) {
            ++report.n_unauditable;
        } else {
            ++report.n_audited;
            cite_records += row.verdict_kind == "cite_reason";
            nka_records += row.verdict_kind == "nka";
        }
        report.per_record.push_back(std::move(row));
    }

    auto stat = [](size_t count, size_t denom, std::string definition) {
        CategoryStat s;
        s.count = count;
        s.denominator = denom;
        s.proportion = denom == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(denom);
        s.denominator_definition = std::move(definition);
        return s;
    };

    size_t faulty = 0, missing = 0, over = 0, misattr = 0;
    for (const auto& row : report.per_record) {
        faulty += row.faulty_reasoning;
        missing += row.missing_answer;
        over += row.over_refusal;
        misattr += row.misattribution;
    }
    report.categories["faulty_reasoning"] =
        stat(faulty, cite_records, "audited records with citation-grounded verdicts");
    report.categories["misattribution"] =
        stat(misattr, cite_records, "audited records with citation-grounded verdicts");
    report.categories["missing_answer"] =
        stat(missing, cite_records, "audited records with citation-grounded verdicts");
    report.categories["over_refusal"] = stat(over, nka_records, "audited records with refusal verdicts");
    return report;
}

json hallucination_report_to_json(const HallucinationReport& report) {
    json categories = json::object();
    for (const auto& [name, stat] : report.categories) {
        categories[name] = {{"count", stat.count},
                            {"denominator", stat.denominator},
                            {"proportion", stat.proportion},
                            {"denominator_definition", stat.denominator_definition}};
    }
    json rows = json::array();
    for (const auto& row : report.per_record) {
        json r = {{"q_id", row.q_id},
                  {"verdict_kind", row.verdict_kind},
                  {"faulty_reasoning", row.faulty_reasoning},
                  {"missing_answer", row.missing_answer},
                  {"over_refusal", row.over_refusal},
                  {"misattribution", row.misattribution},
                  {"unauditable", row.unauditable}};
        if (!row.note.empty()) r["note"] = row.note;
        rows.push_back(std::move(r));
    }
    return json{{"n_records", report.n_records},
                {"n_audited", report.n_audited},
                {"n_unauditable", report.n_unauditable},
                {"categories", categories},
                {"per_record", rows}};
}

void save_hallucination_report(const HallucinationReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error(ErrorCode::not_found, "cannot write audit report: " + path.string());
    out << hallucination_report_to_json(report).dump(2) << '\n';
}

}  // namespace medtrust
