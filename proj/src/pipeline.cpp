#include "medtrust/pipeline.hpp"

#include <algorithm>
#include <unordered_set>

#include "medtrust/parallel.hpp"
#include "medtrust/text.hpp"

namespace medtrust {

namespace {
constexpr const char* kFocusMarker = " ; focus: ";
}

std::string augment_query(const std::string& question, const GapAnalysis& gap) {
    if (gap.missing_aspects.empty()) {
        throw Error(ErrorCode::empty_gap, "gap analysis has no missing aspects");
    }
    std::string base = question;
    if (auto pos = base.find(kFocusMarker); pos != std::string::npos) {
        base.erase(pos);
    }
    return base + kFocusMarker + join(gap.missing_aspects, "; ");
}

Pipeline::Pipeline(const HybridRetriever& retriever, AgentGateway& gateway,
                   PipelineEndpoints endpoints, PipelineConfig config)
    : retriever_(&retriever), gateway_(&gateway), endpoints_(std::move(endpoints)), config_(config) {
    if (config_.t_max < 1) throw Error(ErrorCode::config_error, "t_max must be at least 1");
    if (config_.verifier_view > config_.depth) {
        throw Error(ErrorCode::config_error, "verifier_view cannot exceed retrieval depth");
    }
    if (!config_.enable_mtam_verifier && !endpoints_.base_verifier) {
        throw Error(ErrorCode::config_error, "no base verifier endpoint configured");
    }
}

AnswerRecord Pipeline::answer_question(const BenchmarkQuestion& question) const {
    const AgentEndpoint& verifier =
        config_.enable_mtam_verifier ? endpoints_.verifier : *endpoints_.base_verifier;

    AnswerRecord record;
    record.q_id = question.q_id;
    record.gold = question.gold;

    const int rounds = config_.enable_iteration ? config_.t_max : 1;
    std::unordered_set<std::string> already_shown;
    std::string query = question.question;
    std::optional<Verdict> validated;

    for (int t = 0; t < rounds && !validated; ++t) {
        EvidenceSet evidence = retriever_->retrieve(query, config_.depth, t);

        // Documents judged insufficient in earlier rounds drop below unseen
        // ones so each round's view favors new evidence without losing recall.
        std::stable_partition(evidence.docs.begin(), evidence.docs.end(),
                              [&](const Document& d) { return !already_shown.count(d.doc_id); });
        if (evidence.docs.size() > config_.verifier_view) {
            evidence.docs.resize(config_.verifier_view);
        }

        RoundTrace round;
        round.iteration = t;
        round.query = query;
        round.verifier_model = verifier.model_name;
        for (const auto& doc : evidence.docs) round.doc_ids.push_back(doc.doc_id);

        GapAnalysis gap;
        if (evidence.docs.empty()) {
            round.verdict_kind = "no_evidence";
        } else {
            try {
                VerifierOutput out = gateway_->call_verifier(verifier, question, evidence);
                round.verifier_raw = out.raw;
                if (out.verdict.is_cite_reason()) {
                    round.verdict_kind = "cite_reason";
                    validated = out.verdict;
                } else {
                    round.verdict_kind = "nka";
                    if (out.gap) {
                        gap = *out.gap;
                        round.gap_terms = gap.missing_aspects;
                    }
                }
            } catch (const Error& e) {
                if (e.code() != ErrorCode::unparseable_verdict) throw;
                // A malformed verdict counts as a failed round; retry without
                // inventing gap content.
                round.verdict_kind = "unparseable";
                round.verifier_raw = e.detail();
            }
        }

        record.trace.rounds.push_back(std::move(round));
        if (validated) break;

        for (const auto& doc : evidence.docs) already_shown.insert(doc.doc_id);
        if (!gap.missing_aspects.empty()) {
            query = augment_query(question.question, gap);
        }
    }

    if (validated) {
        record.trace.outcome = PipelineOutcome::validated;
        record.final_verdict = validated;
        record.predicted = gateway_->call_generator(endpoints_.generator, question, validated);
    } else {
        record.trace.outcome = PipelineOutcome::fallback;
        record.predicted = gateway_->call_generator(endpoints_.generator, question, std::nullopt);
    }
    return record;
}

std::vector<AnswerRecord> Pipeline::answer_batch(const std::vector<BenchmarkQuestion>& questions,
                                                 size_t parallelism) const {
    return parallel_map<AnswerRecord>(questions.size(), parallelism, [&](size_t i) {
        try {
            return answer_question(questions[i]);
        } catch (const std::exception& e) {
            AnswerRecord failed;
            failed.q_id = questions[i].q_id;
            failed.gold = questions[i].gold;
            failed.error = e.what();
            return failed;
        }
    });
}

}  // namespace medtrust
