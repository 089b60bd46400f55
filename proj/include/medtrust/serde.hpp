#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "medtrust/pipeline.hpp"
#include "medtrust/verdict.hpp"

namespace medtrust {

nlohmann::json verdict_to_json(const Verdict& verdict);
Verdict verdict_from_json(const nlohmann::json& j);

nlohmann::json answer_record_to_json(const AnswerRecord& record);
AnswerRecord answer_record_from_json(const nlohmann::json& j);

/// Line-delimited answer records (one per question, full trace included).
void save_answer_records(const std::vector<AnswerRecord>& records, const std::filesystem::path& path);
std::vector<AnswerRecord> load_answer_records(const std::filesystem::path& path);

}  // namespace medtrust
