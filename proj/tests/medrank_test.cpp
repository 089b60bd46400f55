#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "medtrust/medrank.hpp"

using namespace medtrust;
using testutil::mock_endpoint;

namespace {

AgentEndpoint assess_endpoint() { return mock_endpoint(AgentRole::generator, "sa"); }

void script_rounds(MockScript& script, const BenchmarkQuestion& q,
                   const std::vector<std::string>& labels) {
    std::vector<std::string> responses;
    for (const auto& l : labels) responses.push_back("The answer is (" + l + ")");
    script.add("self_assess", fingerprints::self_assess("sa", q.question), responses);
}

std::shared_ptr<AgentGateway> gateway_for(const MockScript& script) {
    return std::make_shared<AgentGateway>(std::make_shared<ScriptedMockTransport>(script));
}

}  // namespace

TEST_CASE("self-assessment runs k rounds against the schedule") {
    auto q = testutil::make_question("q1", "stable question?", "B");
    MockScript script;
    script_rounds(script, q, {"B", "B", "B", "B"});
    auto gateway = gateway_for(script);

    StratifyConfig config;
    auto rounds = run_self_assessment(q, *gateway, assess_endpoint(), config);
    REQUIRE(rounds.size() == 4);
    for (const auto& round : rounds) CHECK(round.correct);
    CHECK(rounds[0].decoding.temperature != rounds[3].decoding.temperature);

    SUBCASE("alternating answers alternate correctness") {
        MockScript alt;
        script_rounds(alt, q, {"B", "C", "B", "C"});
        auto gw = gateway_for(alt);
        auto r = run_self_assessment(q, *gw, assess_endpoint(), config);
        CHECK(r[0].correct);
        CHECK_FALSE(r[1].correct);
        CHECK(r[2].correct);
        CHECK_FALSE(r[3].correct);
    }

    SUBCASE("a failing round is recorded incorrect, not retried forever") {
        MockScript none;  // no key for this question at all
        auto gw = gateway_for(none);
        auto r = run_self_assessment(q, *gw, assess_endpoint(), config);
        REQUIRE(r.size() == 4);
        for (const auto& round : r) {
            CHECK_FALSE(round.correct);
            CHECK(round.error.has_value());
        }
    }

    SUBCASE("configuration is validated") {
        StratifyConfig bad;
        bad.k = 1;
        CHECK_THROWS_AS(run_self_assessment(q, *gateway, assess_endpoint(), bad), Error);

        StratifyConfig mismatched;
        mismatched.k = 4;
        mismatched.schedule = {Decoding{}};
        CHECK_THROWS_AS(run_self_assessment(q, *gateway, assess_endpoint(), mismatched), Error);
    }
}

TEST_CASE("difficulty is the count of incorrect rounds") {
    auto make_rounds = [](std::vector<bool> pattern) {
        std::vector<SelfAssessmentRound> rounds;
        for (size_t i = 0; i < pattern.size(); ++i) {
            SelfAssessmentRound r;
            r.round_index = static_cast<int>(i);
            r.correct = pattern[i];
            rounds.push_back(r);
        }
        return rounds;
    };

    CHECK(assess_difficulty(make_rounds({true, true, true, true})).group == DifficultyGroup::stable);
    CHECK(assess_difficulty(make_rounds({true, true, true, true})).incorrect_rounds == 0);

    CHECK(assess_difficulty(make_rounds({false, false, false, false})).group ==
          DifficultyGroup::challenging);
    CHECK(assess_difficulty(make_rounds({false, false, false, false})).incorrect_rounds == 4);

    auto mid = assess_difficulty(make_rounds({true, false, true, false}));
    CHECK(mid.group == DifficultyGroup::medium);
    CHECK(mid.incorrect_rounds == 2);

    SUBCASE("permutation invariant") {
        auto a = assess_difficulty(make_rounds({true, false, false, true}));
        auto b = assess_difficulty(make_rounds({false, true, true, false}));
        CHECK(a.incorrect_rounds == b.incorrect_rounds);
        CHECK(a.group == b.group);
    }

    SUBCASE("boundary groups for several k") {
        for (size_t k : {2u, 3u, 4u, 6u}) {
            CHECK(assess_difficulty(make_rounds(std::vector<bool>(k, true))).group ==
                  DifficultyGroup::stable);
            CHECK(assess_difficulty(make_rounds(std::vector<bool>(k, false))).group ==
                  DifficultyGroup::challenging);
        }
    }
}

TEST_CASE("stratification partitions the corpus") {
    std::vector<BenchmarkQuestion> questions;
    MockScript script;
    // 3 stable, 2 medium, 2 challenging by scripted answers.
    for (int i = 0; i < 7; ++i) {
        auto q = testutil::make_question("q" + std::to_string(i), "question " + std::to_string(i), "A");
        if (i < 3) {
            script_rounds(script, q, {"A", "A", "A", "A"});
        } else if (i < 5) {
            script_rounds(script, q, {"A", "B", "A", "A"});
        } else {
            script_rounds(script, q, {"B", "B", "B", "B"});
        }
        questions.push_back(std::move(q));
    }

    auto gateway = gateway_for(script);
    StratifyConfig config;
    config.parallelism = 3;
    StratifiedCorpus corpus = stratify_corpus(questions, *gateway, assess_endpoint(), config);

    CHECK(corpus.stable == std::vector<std::string>{"q0", "q1", "q2"});
    CHECK(corpus.medium == std::vector<std::string>{"q3", "q4"});
    CHECK(corpus.challenging == std::vector<std::string>{"q5", "q6"});
    CHECK(corpus.rejected.empty());

    SUBCASE("groups are disjoint and cover the input") {
        std::set<std::string> all;
        for (const auto& id : corpus.stable) all.insert(id);
        for (const auto& id : corpus.medium) all.insert(id);
        for (const auto& id : corpus.challenging) all.insert(id);
        CHECK(all.size() == corpus.stable.size() + corpus.medium.size() + corpus.challenging.size());
        CHECK(all.size() == questions.size());
        CHECK(corpus.group_of("q0") == DifficultyGroup::stable);
        CHECK(corpus.group_of("q6") == DifficultyGroup::challenging);
        CHECK_FALSE(corpus.group_of("nope").has_value());
    }

    SUBCASE("partition matches per-question recomputation from persisted rounds") {
        for (const auto& qa : corpus.assessments) {
            DifficultyLabel again = assess_difficulty(qa.rounds);
            CHECK(again.group == qa.label.group);
            CHECK(again.incorrect_rounds == qa.label.incorrect_rounds);
        }
    }

    SUBCASE("records survive a save/load round trip") {
        auto dir = testutil::temp_dir("strat_io");
        save_stratification(corpus, dir / "strat.jsonl", dir / "rejects.jsonl");
        StratifiedCorpus loaded = load_stratification(dir / "strat.jsonl");
        CHECK(loaded.stable == corpus.stable);
        CHECK(loaded.medium == corpus.medium);
        CHECK(loaded.challenging == corpus.challenging);
        REQUIRE(loaded.assessments.size() == corpus.assessments.size());
        CHECK(loaded.assessments[0].rounds.size() == 4);
        CHECK_FALSE(std::filesystem::exists(dir / "rejects.jsonl"));  // nothing rejected
    }
}

TEST_CASE("an empty corpus stratifies to three empty groups") {
    MockScript script;
    auto gateway = gateway_for(script);
    StratifiedCorpus corpus = stratify_corpus({}, *gateway, assess_endpoint(), StratifyConfig{});
    CHECK(corpus.stable.empty());
    CHECK(corpus.medium.empty());
    CHECK(corpus.challenging.empty());
}

TEST_CASE("all-correct corpora land entirely in the stable group") {
    std::vector<BenchmarkQuestion> questions;
    MockScript script;
    for (int i = 0; i < 10; ++i) {
        auto q = testutil::make_question("s" + std::to_string(i), "easy " + std::to_string(i), "C");
        script_rounds(script, q, {"C", "C", "C", "C"});
        questions.push_back(std::move(q));
    }
    auto gateway = gateway_for(script);
    StratifiedCorpus corpus = stratify_corpus(questions, *gateway, assess_endpoint(), StratifyConfig{});
    CHECK(corpus.stable.size() == 10);
    CHECK(corpus.medium.empty());
    CHECK(corpus.challenging.empty());
}

TEST_CASE("criteria names must be unique and non-empty") {
    EvalCriteria good = EvalCriteria::defaults();
    CHECK(good.criteria.size() == 4);
    good.validate();

    EvalCriteria dup{{"a", "a"}};
    CHECK_THROWS_AS(dup.validate(), Error);
    EvalCriteria empty{};
    CHECK_THROWS_AS(empty.validate(), Error);
}
