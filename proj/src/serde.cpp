#include "medtrust/serde.hpp"

#include <fstream>

#include "medtrust/text.hpp"

namespace medtrust {

using nlohmann::json;

json verdict_to_json(const Verdict& verdict) {
    if (verdict.is_nka()) {
        return json{{"kind", "nka"}, {"text", verdict.assertion().text}};
    }
    json statements = json::array();
    for (const auto& stmt : verdict.cite_reason().statements) {
        statements.push_back({{"text", stmt.text}, {"citations", stmt.citations}});
    }
    return json{{"kind", "cite_reason"}, {"statements", std::move(statements)}};
}

Verdict verdict_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "nka") {
        return Verdict::nka(j.at("text").get<std::string>());
    }
    if (kind != "cite_reason") {
        throw Error(ErrorCode::malformed_record, "unknown verdict kind '" + kind + "'");
    }
    std::vector<CiteStatement> statements;
    for (const auto& s : j.at("statements")) {
        statements.push_back({s.at("text").get<std::string>(), s.at("citations").get<std::vector<int>>()});
    }
    return Verdict::cite(std::move(statements));
}

json answer_record_to_json(const AnswerRecord& record) {
    json rounds = json::array();
    for (const auto& round : record.trace.rounds) {
        rounds.push_back({{"t", round.iteration},
                          {"query", round.query},
                          {"doc_ids", round.doc_ids},
                          {"verifier_raw", round.verifier_raw},
                          {"verdict_kind", round.verdict_kind},
                          {"gap", round.gap_terms},
                          {"verifier_model", round.verifier_model}});
    }
    json j = {{"q_id", record.q_id},
              {"predicted", record.predicted},
              {"gold", record.gold},
              {"outcome", record.error                       ? "error"
                          : record.trace.outcome == PipelineOutcome::validated ? "validated"
                                                                               : "fallback"},
              {"rounds", std::move(rounds)}};
    if (record.final_verdict) j["final_verdict"] = verdict_to_json(*record.final_verdict);
    if (record.error) j["error"] = *record.error;
    return j;
}

AnswerRecord answer_record_from_json(const json& j) {
    AnswerRecord record;
    record.q_id = j.at("q_id").get<std::string>();
    record.predicted = j.at("predicted").get<std::string>();
    record.gold = j.at("gold").get<std::string>();
    const std::string outcome = j.at("outcome").get<std::string>();
    record.trace.outcome =
        outcome == "validated" ? PipelineOutcome::validated : PipelineOutcome::fallback;
    for (const auto& r : j.at("rounds")) {
        RoundTrace round;
        round.iteration = r.at("t").get<int>();
        round.query = r.at("query").get<std::string>();
        round.doc_ids = r.at("doc_ids").get<std::vector<std::string>>();
        round.verifier_raw = r.at("verifier_raw").get<std::string>();
        round.verdict_kind = r.at("verdict_kind").get<std::string>();
        round.gap_terms = r.at("gap").get<std::vector<std::string>>();
        round.verifier_model = r.value("verifier_model", std::string{});
        record.trace.rounds.push_back(std::move(round));
    }
    if (j.contains("final_verdict")) record.final_verdict = verdict_from_json(j.at("final_verdict"));
    if (j.contains("error")) record.error = j.at("error").get<std::string>();
    return record;
}

void save_answer_records(const std::vector<AnswerRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error(ErrorCode::not_found, "cannot write records: " + path.string());
    for (const auto& record : records) out << answer_record_to_json(record).dump() << '\n';
}

std::vector<AnswerRecord> load_answer_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::not_found, "cannot open records: " + path.string());
    std::vector<AnswerRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw Error(ErrorCode::malformed_record, "records line " + std::to_string(line_no));
        }
        records.push_back(answer_record_from_json(j));
    }
    return records;
}

}  // namespace medtrust
