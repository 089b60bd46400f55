#include "medtrust/medrank.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "medtrust/parallel.hpp"
#include "medtrust/text.hpp"

namespace medtrust {

using nlohmann::json;

const char* difficulty_group_name(DifficultyGroup group) {
    switch (group) {
        case DifficultyGroup::stable: return "stable";
        case DifficultyGroup::medium: return "medium";
        case DifficultyGroup::challenging: return "challenging";
    }
    return "medium";
}

namespace {

DifficultyGroup difficulty_group_from_name(const std::string& name) {
    if (name == "stable") return DifficultyGroup::stable;
    if (name == "medium") return DifficultyGroup::medium;
    if (name == "challenging") return DifficultyGroup::challenging;
    throw Error(ErrorCode::malformed_record, "unknown difficulty group '" + name + "'");
}

}  // namespace

EvalCriteria EvalCriteria::defaults() {
    return EvalCriteria{{"hallucination", "authenticity", "completeness", "reliability"}};
}

void EvalCriteria::validate() const {
    if (criteria.empty()) throw Error(ErrorCode::config_error, "criteria list is empty");
    std::set<std::string> names(criteria.begin(), criteria.end());
    if (names.size() != criteria.size()) {
        throw Error(ErrorCode::config_error, "criteria names must be unique");
    }
}

std::vector<Decoding> default_decoding_schedule(size_t k) {
    // Temperatures sweep low to high; top-k/top-p stay fixed.
    static const double kTemps[] = {0.2, 0.5, 0.8, 1.0};
    std::vector<Decoding> schedule;
    schedule.reserve(k);
    for (size_t i = 0; i < k; ++i) {
        Decoding d;
        d.temperature = kTemps[i % 4] + 1.0 * static_cast<double>(i / 4);
        d.top_k = 40;
        d.top_p = 0.9;
        schedule.push_back(d);
    }
    return schedule;
}

std::vector<SelfAssessmentRound> run_self_assessment(const BenchmarkQuestion& question,
                                                     AgentGateway& gateway,
                                                     const AgentEndpoint& endpoint,
                                                     const StratifyConfig& config) {
    if (config.k < 2) throw Error(ErrorCode::config_error, "self-assessment needs k >= 2");
    config.criteria.validate();
    std::vector<Decoding> schedule =
        config.schedule.empty() ? default_decoding_schedule(config.k) : config.schedule;
    if (schedule.size() != config.k) {
        throw Error(ErrorCode::config_error, "decoding schedule must have k entries");
    }

    std::vector<SelfAssessmentRound> rounds;
    rounds.reserve(config.k);
    for (size_t i = 0; i < config.k; ++i) {
        SelfAssessmentRound round;
        round.round_index = static_cast<int>(i);
        round.decoding = schedule[i];
        try {
            round.predicted =
                gateway.call_self_assessment(endpoint, question, config.criteria.criteria, schedule[i]);
            round.correct = round.predicted == question.gold;
        } catch (const Error& e) {
            round.correct = false;
            round.error = e.what();
        }
        rounds.push_back(std::move(round));
    }
    return rounds;
}

DifficultyLabel assess_difficulty(const std::vector<SelfAssessmentRound>& rounds) {
    if (rounds.empty()) throw Error(ErrorCode::config_error, "no assessment rounds");
    DifficultyLabel label;
    for (const auto& round : rounds) {
        if (!round.correct) ++label.incorrect_rounds;
    }
    const int k = static_cast<int>(rounds.size());
    if (label.incorrect_rounds == 0) {
        label.group = DifficultyGroup::stable;
    } else if (label.incorrect_rounds == k) {
        label.group = DifficultyGroup::challenging;
    } else {
        label.group = DifficultyGroup::medium;
    }
    return label;
}

std::optional<DifficultyGroup> StratifiedCorpus::group_of(const std::string& q_id) const {
    for (const auto& id : stable)
        if (id == q_id) return DifficultyGroup::stable;
    for (const auto& id : medium)
        if (id == q_id) return DifficultyGroup::medium;
    for (const auto& id : challenging)
        if (id == q_id) return DifficultyGroup::challenging;
    return std::nullopt;
}

StratifiedCorpus stratify_corpus(const std::vector<BenchmarkQuestion>& questions,
                                 AgentGateway& gateway, const AgentEndpoint& endpoint,
                                 const StratifyConfig& config) {
    struct Outcome {
        std::optional<QuestionAssessment> assessment;
        std::string q_id;
        std::string error;
    };

    auto outcomes = parallel_map<Outcome>(questions.size(), config.parallelism, [&](size_t i) {
        Outcome out;
        out.q_id = questions[i].q_id;
        try {
            QuestionAssessment qa;
            qa.q_id = questions[i].q_id;
            qa.rounds = run_self_assessment(questions[i], gateway, endpoint, config);
            qa.label = assess_difficulty(qa.rounds);
            out.assessment = std::move(qa);
        } catch (const std::exception& e) {
            out.error = e.what();
        }
        return out;
    });

    StratifiedCorpus corpus;
    for (auto& out : outcomes) {
        if (!out.assessment) {
            corpus.rejected.emplace_back(out.q_id, out.error);
            continue;
        }
        switch (out.assessment->label.group) {
            case DifficultyGroup::stable: corpus.stable.push_back(out.q_id); break;
            case DifficultyGroup::medium: corpus.medium.push_back(out.q_id); break;
            case DifficultyGroup::challenging: corpus.challenging.push_back(out.q_id); break;
        }
        corpus.assessments.push_back(std::move(*out.assessment));
    }
    return corpus;
}

void save_stratification(const StratifiedCorpus& corpus, const std::filesystem::path& out_path,
                         const std::filesystem::path& reject_path) {
    std::ofstream out(out_path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error(ErrorCode::not_found, "cannot write stratification: " + out_path.string());
    for (const auto& qa : corpus.assessments) {
        json rounds = json::array();
        for (const auto& round : qa.rounds) {
            json r = {{"round", round.round_index},
                      {"decoding",
                       {{"temperature", round.decoding.temperature},
                        {"top_k", round.decoding.top_k},
                        {"top_p", round.decoding.top_p}}},
                      {"predicted", round.predicted},
                      {"correct", round.correct}};
            if (round.error) r["error"] = *round.error;
            rounds.push_back(std::move(r));
        }
        json rec = {{"q_id", qa.q_id},
                    {"rounds", std::move(rounds)},
                    {"l", qa.label.incorrect_rounds},
                    {"group", difficulty_group_name(qa.label.group)}};
        out << rec.dump() << '\n';
    }

    if (!corpus.rejected.empty()) {
        std::ofstream rej(reject_path, std::ios::trunc | std::ios::binary);
        for (const auto& [q_id, reason] : corpus.rejected) {
            rej << json{{"q_id", q_id}, {"reason", reason}}.dump() << '\n';
        }
    }
}

StratifiedCorpus load_stratification(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::not_found, "cannot open stratification: " + path.string());

    StratifiedCorpus corpus;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            throw Error(ErrorCode::malformed_record,
                        "stratification line " + std::to_string(line_no));
        }
        QuestionAssessment qa;
        qa.q_id = rec.at("q_id").get<std::string>();
        qa.label.incorrect_rounds = rec.at("l").get<int>();
        qa.label.group = difficulty_group_from_name(rec.at("group").get<std::string>());
        for (const auto& r : rec.at("rounds")) {
            SelfAssessmentRound round;
            round.round_index = r.at("round").get<int>();
            round.decoding.temperature = r.at("decoding").at("temperature").get<double>();
            round.decoding.top_k = r.at("decoding").at("top_k").get<int>();
            round.decoding.top_p = r.at("decoding").at("top_p").get<double>();
            round.predicted = r.at("predicted").get<std::string>();
            round.correct = r.at("correct").get<bool>();
            if (r.contains("error")) round.error = r.at("error").get<std::string>();
            qa.rounds.push_back(std::move(round));
        }
        switch (qa.label.group) {
            case DifficultyGroup::stable: corpus.stable.push_back(qa.q_id); break;
            case DifficultyGroup::medium: corpus.medium.push_back(qa.q_id); break;
            case DifficultyGroup::challenging: corpus.challenging.push_back(qa.q_id); break;
        }
        corpus.assessments.push_back(std::move(qa));
    }
    return corpus;
}

}  // namespace medtrust
