#include <doctest.h>

#include "helpers.hpp"
#include "medtrust/pipeline.hpp"
#include "medtrust/serde.hpp"

using namespace medtrust;
using testutil::mock_endpoint;

namespace {

// Small deterministic world: one question whose tokens hit four documents.
struct World {
    CorpusStore store;
    SparseIndex index;
    HybridRetriever retriever;
    BenchmarkQuestion question;
    MockScript script;

    World()
        : store(CorpusStore::from_documents({
              {"w1", "", "renal dosing of cardamine in adults", Source::other},
              {"w2", "", "cardamine outcomes in renal impairment", Source::other},
              {"w3", "", "cardamine mechanism and clearance", Source::other},
              {"w4", "", "renal clearance affects cardamine levels", Source::other},
              {"w5", "", "unrelated gardening notes for spring", Source::other},
          })),
          index(SparseIndex::build(store)),
          retriever(store, index, RetrievalConfig{32, 60.0, 100}),
          question(testutil::make_question("qd", "what is the renal dosing of cardamine?")) {}

    PipelineEndpoints endpoints() const {
        PipelineEndpoints eps;
        eps.verifier = mock_endpoint(AgentRole::verifier, "aligned-verifier");
        eps.base_verifier = mock_endpoint(AgentRole::verifier, "plain-verifier");
        eps.generator = mock_endpoint(AgentRole::generator, "gen");
        return eps;
    }

    void script_verifier(std::vector<std::string> responses, const char* model = "aligned-verifier") {
        script.add("verify", fingerprints::verifier(model, question.question), std::move(responses));
    }
    void script_generator(const std::string& reasoning, const std::string& response) {
        script.add("generate", fingerprints::generator("gen", question.question, reasoning), {response});
    }

    std::shared_ptr<AgentGateway> gateway() const {
        return std::make_shared<AgentGateway>(std::make_shared<ScriptedMockTransport>(script));
    }
};

const char* kCiteRaw = "cardamine needs renal adjustment [Doc 1] clearance falls with impairment [Doc 2]";

std::string nka_with(const std::string& gaps) {
    return std::string(kNkaCanonicalText) + "\nGAPS: " + gaps;
}

}  // namespace

TEST_CASE("augment_query builds and replaces the focus clause") {
    CHECK(augment_query("Drug X first line?", GapAnalysis{{"renal dosing"}}) ==
          "Drug X first line? ; focus: renal dosing");
    CHECK(augment_query("q", GapAnalysis{{"a", "b", "c"}}) == "q ; focus: a; b; c");

    std::string once = augment_query("q", GapAnalysis{{"g1"}});
    CHECK(augment_query(once, GapAnalysis{{"g2"}}) == "q ; focus: g2");

    try {
        augment_query("q", GapAnalysis{});
        FAIL("expected EmptyGap");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::empty_gap);
    }
}

TEST_CASE("validation at round zero calls the generator once with reasoning") {
    World world;
    world.script_verifier({kCiteRaw});
    Verdict parsed = parse_verdict(kCiteRaw, 5);
    world.script_generator(render_verdict(parsed), "The answer is (B)");

    auto gateway = world.gateway();
    Pipeline pipeline(world.retriever, *gateway, world.endpoints(), PipelineConfig{});
    AnswerRecord record = pipeline.answer_question(world.question);

    CHECK(record.trace.rounds.size() == 1);
    CHECK(record.trace.outcome == PipelineOutcome::validated);
    CHECK(record.predicted == "B");
    REQUIRE(record.final_verdict.has_value());
    CHECK(record.final_verdict->is_cite_reason());
    CHECK(record.trace.rounds[0].verdict_kind == "cite_reason");
    CHECK(record.trace.rounds[0].doc_ids.size() <= 5);

    int generator_calls = 0;
    for (const auto& call : gateway->call_log()) {
        if (call.task == "generate") ++generator_calls;
    }
    CHECK(generator_calls == 1);
}

TEST_CASE("gap-driven refinement reaches validation at round two") {
    World world;
    world.script_verifier({nka_with("dialysis dosing"), nka_with("half life data"), kCiteRaw});
    world.script_generator(render_verdict(parse_verdict(kCiteRaw, 5)), "The answer is (B)");

    auto gateway = world.gateway();
    Pipeline pipeline(world.retriever, *gateway, world.endpoints(), PipelineConfig{});
    AnswerRecord record = pipeline.answer_question(world.question);

    REQUIRE(record.trace.rounds.size() == 3);
    CHECK(record.trace.outcome == PipelineOutcome::validated);

    // Round 1 ran the original query; round 2 carries round 1's gap terms.
    CHECK(record.trace.rounds[0].query == world.question.question);
    CHECK(record.trace.rounds[1].query.find("dialysis dosing") != std::string::npos);
    CHECK(record.trace.rounds[2].query.find("half life data") != std::string::npos);
    CHECK(record.trace.rounds[2].query.find("dialysis dosing") == std::string::npos);  // replaced

    // Queries differ only in the focus clause.
    for (const auto& round : record.trace.rounds) {
        CHECK(round.query.substr(0, world.question.question.size()) == world.question.question);
    }
}

TEST_CASE("all-refusal sessions fall back to parametric generation") {
    World world;
    world.script_verifier({nka_with("x"), nka_with("x"), nka_with("x")});
    world.script_generator("", "The answer is (D)");

    auto gateway = world.gateway();
    Pipeline pipeline(world.retriever, *gateway, world.endpoints(), PipelineConfig{});
    AnswerRecord record = pipeline.answer_question(world.question);

    CHECK(record.trace.rounds.size() == 3);
    CHECK(record.trace.outcome == PipelineOutcome::fallback);
    CHECK_FALSE(record.final_verdict.has_value());
    CHECK(record.predicted == "D");

    int generator_calls = 0;
    for (const auto& call : gateway->call_log()) {
        if (call.task == "generate") ++generator_calls;
    }
    CHECK(generator_calls == 1);
}

TEST_CASE("a refusal without gap terms retries the same query") {
    World world;
    world.script_verifier({std::string(kNkaCanonicalText), kCiteRaw});
    world.script_generator(render_verdict(parse_verdict(kCiteRaw, 5)), "The answer is (A)");

    auto gateway = world.gateway();
    Pipeline pipeline(world.retriever, *gateway, world.endpoints(), PipelineConfig{});
    AnswerRecord record = pipeline.answer_question(world.question);

    REQUIRE(record.trace.rounds.size() == 2);
    CHECK(record.trace.rounds[1].query == record.trace.rounds[0].query);
}

TEST_CASE("malformed verifier output counts as a failed round and retries") {
    World world;
    world.script_verifier({"this verdict has no citations at all", kCiteRaw});
    world.script_generator(render_verdict(parse_verdict(kCiteRaw, 5)), "The answer is (A)");

    auto gateway = world.gateway();
    Pipeline pipeline(world.retriever, *gateway, world.endpoints(), PipelineConfig{});
    AnswerRecord record = pipeline.answer_question(world.question);

    REQUIRE(record.trace.rounds.size() == 2);
    CHECK(record.trace.rounds[0].verdict_kind == "unparseable");
    CHECK(record.trace.rounds[1].query == record.trace.rounds[0].query);
    CHECK(record.trace.outcome == PipelineOutcome::validated);
}

TEST_CASE("documents already shown are demoted in later views") {
    World world;
    world.script_verifier({nka_with("gardening"), nka_with("gardening"), nka_with("gardening")});
    world.script_generator("", "The answer is (A)");

    PipelineConfig config;
    config.verifier_view = 2;
    auto gateway = world.gateway();
    Pipeline pipeline(world.retriever, *gateway, world.endpoints(), config);
    AnswerRecord record = pipeline.answer_question(world.question);

    REQUIRE(record.trace.rounds.size() == 3);
    const auto& r0 = record.trace.rounds[0].doc_ids;
    const auto& r1 = record.trace.rounds[1].doc_ids;
    for (const auto& id : r1) {
        CHECK(std::find(r0.begin(), r0.end(), id) == r0.end());  // fresh docs surface first
    }
}

TEST_CASE("ablation flags reshape the trace") {
    SUBCASE("single-round mode stops after one failed round") {
        World world;
        world.script_verifier({nka_with("x")});
        world.script_generator("", "The answer is (C)");

        PipelineConfig config;
        config.enable_iteration = false;
        auto gateway = world.gateway();
        Pipeline pipeline(world.retriever, *gateway, world.endpoints(), config);
        AnswerRecord record = pipeline.answer_question(world.question);
        CHECK(record.trace.rounds.size() == 1);
        CHECK(record.trace.outcome == PipelineOutcome::fallback);
    }

    SUBCASE("disabling the aligned verifier swaps in the base model") {
        World world;
        world.script_verifier({kCiteRaw}, "plain-verifier");
        world.script_generator(render_verdict(parse_verdict(kCiteRaw, 5)), "The answer is (B)");

        PipelineConfig config;
        config.enable_mtam_verifier = false;
        auto gateway = world.gateway();
        Pipeline pipeline(world.retriever, *gateway, world.endpoints(), config);
        AnswerRecord record = pipeline.answer_question(world.question);
        CHECK(record.trace.rounds[0].verifier_model == "plain-verifier");
        CHECK(record.trace.outcome == PipelineOutcome::validated);
    }

    SUBCASE("missing base verifier is a config error") {
        World world;
        PipelineConfig config;
        config.enable_mtam_verifier = false;
        PipelineEndpoints eps = world.endpoints();
        eps.base_verifier.reset();
        auto gateway = world.gateway();
        CHECK_THROWS_AS(Pipeline(world.retriever, *gateway, eps, config), Error);
    }
}

TEST_CASE("batch answers are identical across parallelism settings") {
    World world;

    // Three questions with distinct scripted behaviors over the same corpus.
    std::vector<BenchmarkQuestion> batch;
    for (int i = 0; i < 3; ++i) {
        auto q = testutil::make_question("b" + std::to_string(i),
                                         "renal cardamine query variant " + std::to_string(i));
        if (i == 0) {
            world.script.add("verify", fingerprints::verifier("aligned-verifier", q.question),
                             {kCiteRaw});
            world.script.add("generate",
                             fingerprints::generator("gen", q.question,
                                                     render_verdict(parse_verdict(kCiteRaw, 5))),
                             {"The answer is (B)"});
        } else {
            std::string nka = std::string(kNkaCanonicalText) + "\nGAPS: variant " + std::to_string(i);
            world.script.add("verify", fingerprints::verifier("aligned-verifier", q.question),
                             {nka, nka, nka});
            world.script.add("generate", fingerprints::generator("gen", q.question, ""),
                             {"The answer is (C)"});
        }
        batch.push_back(std::move(q));
    }

    auto run_with = [&](size_t parallelism) {
        auto gateway = world.gateway();  // fresh mock cursors per run
        Pipeline pipeline(world.retriever, *gateway, world.endpoints(), PipelineConfig{});
        std::string serialized;
        for (const auto& record : pipeline.answer_batch(batch, parallelism)) {
            serialized += answer_record_to_json(record).dump() + "\n";
        }
        return serialized;
    };

    std::string sequential = run_with(1);
    CHECK(run_with(4) == sequential);
    CHECK(run_with(3) == sequential);
}

TEST_CASE("a query matching nothing records empty-evidence rounds and falls back") {
    World world;
    auto off_corpus = testutil::make_question("qz", "xylophone maintenance schedule?");
    world.script.add("generate", fingerprints::generator("gen", off_corpus.question, ""),
                     {"The answer is (A)"});

    auto gateway = world.gateway();
    Pipeline pipeline(world.retriever, *gateway, world.endpoints(), PipelineConfig{});
    AnswerRecord record = pipeline.answer_question(off_corpus);

    CHECK(record.trace.rounds.size() == 3);
    for (const auto& round : record.trace.rounds) {
        CHECK(round.verdict_kind == "no_evidence");
        CHECK(round.doc_ids.empty());
    }
    CHECK(record.trace.outcome == PipelineOutcome::fallback);
    CHECK(record.predicted == "A");
}

TEST_CASE("batches preserve order and isolate failures") {
    World world;
    world.script_verifier({kCiteRaw});
    world.script_generator(render_verdict(parse_verdict(kCiteRaw, 5)), "The answer is (B)");

    auto failing = testutil::make_question("qf", "question with no script");
    std::vector<BenchmarkQuestion> batch = {world.question, failing};

    auto gateway = world.gateway();
    Pipeline pipeline(world.retriever, *gateway, world.endpoints(), PipelineConfig{});
    auto records = pipeline.answer_batch(batch, 2);

    REQUIRE(records.size() == 2);
    CHECK(records[0].q_id == "qd");
    CHECK_FALSE(records[0].error.has_value());
    CHECK(records[1].q_id == "qf");
    CHECK(records[1].error.has_value());
}
