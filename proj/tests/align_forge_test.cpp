#include <doctest.h>

#include <json.hpp>

#include "helpers.hpp"
#include "medtrust/align_forge.hpp"

using namespace medtrust;
using testutil::mock_endpoint;

namespace {

// Ten documents; d1..d5 become the working docset in most cases.
std::vector<Document> ten_docs() {
    std::vector<Document> docs;
    for (int i = 1; i <= 10; ++i) {
        docs.push_back({"d" + std::to_string(i), "", "content of document " + std::to_string(i),
                        Source::other});
    }
    return docs;
}

struct ForgeWorld {
    CorpusStore store;
    BenchmarkQuestion question;
    MockScript script;
    ForgeEndpoints endpoints;

    ForgeWorld()
        : store(CorpusStore::from_documents(ten_docs())),
          question(testutil::make_question("fq", "forge question?", "B")) {
        endpoints.primary_drafter = mock_endpoint(AgentRole::generator, "prime");
        endpoints.alt_drafter = mock_endpoint(AgentRole::generator, "alt");
        endpoints.generator = mock_endpoint(AgentRole::generator, "psi");
        endpoints.nli = mock_endpoint(AgentRole::nli, "judge");
        endpoints.embedder = mock_endpoint(AgentRole::embedder, "enc");
    }

    std::vector<Document> docset(std::initializer_list<int> nums) const {
        std::vector<Document> docs;
        for (int n : nums) docs.push_back(store.get_document("d" + std::to_string(n)));
        return docs;
    }

    std::string concat(const std::vector<Document>& docs) const {
        std::string joined;
        for (size_t i = 0; i < docs.size(); ++i) {
            if (i) joined += kPremiseSeparator;
            joined += docs[i].text;
        }
        return joined;
    }

    void script_draft(const char* model, const std::vector<Document>& docs, const std::string& text) {
        std::vector<std::string> ids;
        for (const auto& d : docs) ids.push_back(d.doc_id);
        script.add("draft", fingerprints::draft(model, question.question, ids), {text});
    }
    void script_nli(const std::string& premise, const std::string& hypothesis, bool entail) {
        script.add("nli", fingerprints::nli("judge", premise, hypothesis),
                   {entail ? "entail" : "not_entail"});
    }
    void script_psi(const std::string& reasoning, const std::string& label) {
        script.add("generate", fingerprints::generator("psi", question.question, reasoning),
                   {"The answer is (" + label + ")"});
    }
    void script_embed(const std::string& text, const std::vector<double>& v) {
        script.add("embed", fingerprints::embed("enc", text), {nlohmann::json(v).dump()});
    }

    std::pair<std::shared_ptr<AgentGateway>, std::shared_ptr<AlignForge>> forge(
        ForgeConfig config = {}) const {
        auto gateway = std::make_shared<AgentGateway>(std::make_shared<ScriptedMockTransport>(script));
        auto f = std::make_shared<AlignForge>(store, *gateway, endpoints, config);
        return {gateway, f};
    }
};

EvidenceSet candidates_from(const std::vector<Document>& docs) {
    EvidenceSet ev;
    ev.query_text = "q";
    ev.docs = docs;
    return ev;
}

const char* kAltCite = "alternate claim holds [Doc 1] secondary claim follows [Doc 2]";
const char* kPrimeCite = "primary claim holds [Doc 1] dosing is established [Doc 2]";

}  // namespace

TEST_CASE("document composition follows achievable entailment mixes") {
    ForgeWorld world;
    auto all = world.store.documents();

    SUBCASE("3 entailing and 7 non-entailing candidates") {
        std::string hyp = nli_hypothesis(world.question, "B");
        for (size_t i = 0; i < all.size(); ++i) {
            world.script_nli(all[i].text, hyp, i < 3);
        }
        auto [gateway, forge] = world.forge();
        auto sets = forge->compose_document_sets(world.question, candidates_from(all));

        REQUIRE(sets.size() == 4);  // (3,2) (2,3) (1,4) (0,5)
        CHECK(sets[0].n_entail == 3);
        CHECK(sets[0].n_not_entail == 2);
        CHECK(sets[3].n_entail == 0);

        for (const auto& set : sets) {
            CHECK(set.doc_ids.size() == 5);
            CHECK(set.labels.size() == 5);
            int entail = 0;
            for (auto label : set.labels) entail += label == NliLabel::entail;
            CHECK(entail == set.n_entail);
        }

        // Fill order follows candidate rank within each label class.
        CHECK(sets[0].doc_ids == std::vector<std::string>{"d1", "d2", "d3", "d4", "d5"});
        CHECK(sets[1].doc_ids == std::vector<std::string>{"d1", "d2", "d4", "d5", "d6"});
    }

    SUBCASE("all entailing yields only the pure composition") {
        std::string hyp = nli_hypothesis(world.question, "B");
        for (const auto& doc : all) world.script_nli(doc.text, hyp, true);
        auto [gateway, forge] = world.forge();
        auto sets = forge->compose_document_sets(world.question, candidates_from(all));
        REQUIRE(sets.size() == 1);
        CHECK(sets[0].n_entail == 5);
    }

    SUBCASE("fewer than five candidates is an error") {
        auto [gateway, forge] = world.forge();
        auto few = candidates_from(world.docset({1, 2, 3, 4}));
        try {
            forge->compose_document_sets(world.question, few);
            FAIL("expected TooFewCandidates");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::too_few_candidates);
        }
    }
}

TEST_CASE("positive verification requires the gold answer") {
    ForgeWorld world;
    Verdict reasoning = parse_verdict(kPrimeCite, 5);
    world.script_psi(render_verdict(reasoning), "B");
    {
        auto [gateway, forge] = world.forge();
        CHECK(forge->verify_positive(world.question, reasoning));
    }

    ForgeWorld wrong;
    wrong.script_psi(render_verdict(reasoning), "C");
    {
        auto [gateway, forge] = wrong.forge();
        CHECK_FALSE(forge->verify_positive(wrong.question, reasoning));
    }

    ForgeWorld silent;  // no script at all: gateway failure counts unverified
    {
        auto [gateway, forge] = silent.forge();
        CHECK_FALSE(forge->verify_positive(silent.question, reasoning));
    }
}

TEST_CASE("faulty reasoning emits exactly when entailment fails") {
    ForgeWorld world;
    auto docs = world.docset({1, 2, 3, 4, 5});
    world.script_draft("alt", docs, kAltCite);

    Verdict alt = parse_verdict(kAltCite, 5);
    SUBCASE("no entailment -> sample") {
        world.script_nli(world.concat(docs), reasoning_text(alt), false);
        auto [gateway, forge] = world.forge();
        auto sample = forge->build_faulty_reasoning(world.question, docs);
        REQUIRE(sample.has_value());
        CHECK(sample->category == HallucinationCategory::faulty_reasoning);
        CHECK(sample->verdict == alt);
        CHECK(revalidate(*sample));
    }
    SUBCASE("entailed -> nothing") {
        world.script_nli(world.concat(docs), reasoning_text(alt), true);
        auto [gateway, forge] = world.forge();
        CHECK_FALSE(forge->build_faulty_reasoning(world.question, docs).has_value());
    }
    SUBCASE("an alt refusal is not a faulty-reasoning candidate") {
        ForgeWorld refusing;
        refusing.script_draft("alt", docs, kNkaCanonicalText);
        auto [gateway, forge] = refusing.forge();
        CHECK_FALSE(forge->build_faulty_reasoning(refusing.question, docs).has_value());
    }
}

TEST_CASE("missing answer requires a stable question the model already solves") {
    ForgeWorld world;
    auto docs = world.docset({1, 2, 3, 4, 5});
    world.script_draft("alt", docs, kAltCite);
    Verdict alt = parse_verdict(kAltCite, 5);

    SUBCASE("reasoning that flips the answer is the defect") {
        world.script_psi("", "B");                        // parametric: gold
        world.script_psi(render_verdict(alt), "C");       // with reasoning: wrong
        auto [gateway, forge] = world.forge();
        auto sample = forge->build_missing_answer(world.question, DifficultyGroup::stable, docs);
        REQUIRE(sample.has_value());
        CHECK(sample->evidence.answer_parametric == "B");
        CHECK(sample->evidence.answer_with_reasoning == "C");
        CHECK(revalidate(*sample));
    }
    SUBCASE("consistent answers emit nothing") {
        world.script_psi("", "B");
        world.script_psi(render_verdict(alt), "B");
        auto [gateway, forge] = world.forge();
        CHECK_FALSE(
            forge->build_missing_answer(world.question, DifficultyGroup::stable, docs).has_value());
    }
    SUBCASE("non-stable groups are skipped before any call") {
        auto [gateway, forge] = world.forge();
        CHECK_FALSE(
            forge->build_missing_answer(world.question, DifficultyGroup::challenging, docs).has_value());
        CHECK_FALSE(forge->build_missing_answer(world.question, std::nullopt, docs).has_value());
    }
    SUBCASE("a parametric miss disqualifies the question") {
        world.script_psi("", "D");  // no longer consistently correct
        auto [gateway, forge] = world.forge();
        CHECK_FALSE(
            forge->build_missing_answer(world.question, DifficultyGroup::stable, docs).has_value());
    }
}

TEST_CASE("over-refusal pairs a valid rationale with an unjustified refusal") {
    ForgeWorld world;
    auto docs = world.docset({1, 2, 3, 4, 5});
    Verdict prime = parse_verdict(kPrimeCite, 5);

    world.script_draft("prime", docs, kPrimeCite);
    world.script_draft("alt", docs, kNkaCanonicalText);

    SUBCASE("full predicate satisfied") {
        world.script_nli(world.concat(docs), reasoning_text(prime), true);
        world.script_psi(render_verdict(prime), "B");
        world.script_psi("", "B");
        auto [gateway, forge] = world.forge();
        auto sample = forge->build_over_refusal(world.question, docs);
        REQUIRE(sample.has_value());
        CHECK(sample->category == HallucinationCategory::over_refusal);
        CHECK(sample->verdict.is_nka());
        CHECK(revalidate(*sample));
    }
    SUBCASE("rationale not entailed -> nothing") {
        world.script_nli(world.concat(docs), reasoning_text(prime), false);
        auto [gateway, forge] = world.forge();
        CHECK_FALSE(forge->build_over_refusal(world.question, docs).has_value());
    }
    SUBCASE("inconsistent answers -> nothing") {
        world.script_nli(world.concat(docs), reasoning_text(prime), true);
        world.script_psi(render_verdict(prime), "B");
        world.script_psi("", "C");
        auto [gateway, forge] = world.forge();
        CHECK_FALSE(forge->build_over_refusal(world.question, docs).has_value());
    }
    SUBCASE("no refusal from the alt drafter -> nothing") {
        ForgeWorld both_cite;
        both_cite.script_draft("prime", docs, kPrimeCite);
        both_cite.script_draft("alt", docs, kAltCite);
        auto [gateway, forge] = both_cite.forge();
        CHECK_FALSE(forge->build_over_refusal(both_cite.question, docs).has_value());
    }
}

TEST_CASE("set similarity is the mean of per-distractor best cosines") {
    ForgeWorld world;
    auto source = world.docset({1, 2});
    auto other = world.docset({3, 4});

    SUBCASE("identical sets have similarity one") {
        world.script_embed(source[0].text, {1, 0, 0});
        world.script_embed(source[1].text, {0, 1, 0});
        auto [gateway, forge] = world.forge();
        CHECK(forge->set_similarity(source, source) == doctest::Approx(1.0));
    }
    SUBCASE("orthogonal sets have similarity zero") {
        world.script_embed(source[0].text, {1, 0, 0});
        world.script_embed(source[1].text, {1, 0, 0});
        world.script_embed(other[0].text, {0, 1, 0});
        world.script_embed(other[1].text, {0, 0, 1});
        auto [gateway, forge] = world.forge();
        CHECK(forge->set_similarity(source, other) == doctest::Approx(0.0));
    }
    SUBCASE("two-by-two hand-computed mean of max") {
        world.script_embed(source[0].text, {1, 0, 0});
        world.script_embed(source[1].text, {0, 1, 0});
        world.script_embed(other[0].text, {0.6, 0.8, 0});  // best cos = 0.8 (vs e2)
        world.script_embed(other[1].text, {1, 0, 0});      // best cos = 1.0 (vs e1)
        auto [gateway, forge] = world.forge();
        CHECK(forge->set_similarity(source, other) == doctest::Approx(0.9));
    }
    SUBCASE("empty sets are rejected") {
        auto [gateway, forge] = world.forge();
        CHECK_THROWS_AS(forge->set_similarity({}, source), Error);
    }
}

TEST_CASE("misattribution needs similar distractors that break entailment") {
    ForgeWorld world;
    auto docs = world.docset({1, 2, 3, 4, 5});
    Verdict prime = parse_verdict(kPrimeCite, 5);

    auto embed_world = [&](ForgeWorld& w, double cos_value) {
        for (int i = 1; i <= 5; ++i) {
            w.script_embed(w.store.get_document("d" + std::to_string(i)).text, {1, 0});
        }
        double c = cos_value;
        double s = std::sqrt(1.0 - c * c);
        for (int i = 6; i <= 10; ++i) {
            w.script_embed(w.store.get_document("d" + std::to_string(i)).text, {c, s});
        }
    };

    SUBCASE("similarity above the threshold with failed entailment emits") {
        embed_world(world, 0.9);
        // equal cosines tie-break lexicographically: d10 precedes d6
        auto distractors = world.docset({10, 6, 7, 8, 9});
        world.script_nli(world.concat(distractors), reasoning_text(prime), false);
        auto [gateway, forge] = world.forge();
        auto sample = forge->build_misattribution(world.question, docs, prime);
        REQUIRE(sample.has_value());
        CHECK(sample->category == HallucinationCategory::misattribution);
        CHECK(sample->doc_ids.size() == 5);
        CHECK(sample->evidence.similarity == doctest::Approx(0.9));
        CHECK(sample->evidence.source_doc_ids.size() == 5);
        CHECK(revalidate(*sample));
    }
    SUBCASE("similarity below the threshold emits nothing") {
        embed_world(world, 0.7);
        auto [gateway, forge] = world.forge();
        CHECK_FALSE(forge->build_misattribution(world.question, docs, prime).has_value());
    }
    SUBCASE("entailed distractors emit nothing") {
        embed_world(world, 0.9);
        auto distractors = world.docset({10, 6, 7, 8, 9});
        world.script_nli(world.concat(distractors), reasoning_text(prime), true);
        auto [gateway, forge] = world.forge();
        CHECK_FALSE(forge->build_misattribution(world.question, docs, prime).has_value());
    }
    SUBCASE("a refusal cannot be misattributed") {
        auto [gateway, forge] = world.forge();
        CHECK_THROWS_AS(forge->build_misattribution(world.question, docs, Verdict::nka()), Error);
    }
}

TEST_CASE("preference pairing matches positives to negatives per question") {
    auto q1 = testutil::make_question("q1", "first?", "A");
    auto q2 = testutil::make_question("q2", "second?", "B");
    StratifiedCorpus groups;
    groups.stable = {"q1"};
    groups.medium = {"q2"};

    ForgeEndpoints endpoints;
    endpoints.primary_drafter = mock_endpoint(AgentRole::generator, "prime");
    endpoints.alt_drafter = mock_endpoint(AgentRole::generator, "alt");
    endpoints.generator = mock_endpoint(AgentRole::generator, "psi");
    endpoints.nli = mock_endpoint(AgentRole::nli, "judge");
    endpoints.embedder = mock_endpoint(AgentRole::embedder, "enc");

    Verdict good = Verdict::cite({{"good reasoning", {1}}});
    Verdict bad = Verdict::cite({{"bad reasoning", {1}}});

    auto positive = [&](const std::string& q_id) {
        return PositiveSample{q_id, {"d1", "d2", "d3", "d4", "d5"}, good, "prime"};
    };
    auto negative = [&](const std::string& q_id, HallucinationCategory cat, Verdict v) {
        NegativeSample n;
        n.q_id = q_id;
        n.doc_ids = {"d1", "d2", "d3", "d4", "d5"};
        n.verdict = std::move(v);
        n.category = cat;
        n.drafter_model = "alt";
        return n;
    };

    SUBCASE("one positive and one negative make one pair") {
        auto out = emit_preference_corpus({positive("q1")},
                                          {negative("q1", HallucinationCategory::faulty_reasoning, bad)},
                                          {q1, q2}, groups, endpoints, 0.8);
        REQUIRE(out.pairs.size() == 1);
        CHECK(out.pairs[0].category == HallucinationCategory::faulty_reasoning);
        CHECK(out.pairs[0].chosen == good);
        CHECK(out.pairs[0].rejected == bad);
        CHECK(out.manifest.unpairable == 0);
    }

    SUBCASE("negatives in four categories yield four pairs") {
        std::vector<NegativeSample> negatives = {
            negative("q1", HallucinationCategory::faulty_reasoning, bad),
            negative("q1", HallucinationCategory::missing_answer, bad),
            negative("q1", HallucinationCategory::over_refusal, Verdict::nka()),
            negative("q1", HallucinationCategory::misattribution, bad),
        };
        auto out = emit_preference_corpus({positive("q1")}, negatives, {q1, q2}, groups, endpoints, 0.8);
        CHECK(out.pairs.size() == 4);
        CHECK(out.manifest.pairs_per_category.size() == 4);
        CHECK(out.manifest.negatives_per_group.at("stable") == 4);
    }

    SUBCASE("a positive without negatives pairs with nothing and is logged") {
        auto out = emit_preference_corpus({positive("q2")}, {}, {q1, q2}, groups, endpoints, 0.8);
        CHECK(out.pairs.empty());
        REQUIRE(out.log.size() == 1);
        CHECK(out.log[0].find("q2") != std::string::npos);
    }

    SUBCASE("identical chosen and rejected verdicts never pair") {
        auto out = emit_preference_corpus(
            {positive("q1")}, {negative("q1", HallucinationCategory::misattribution, good)}, {q1, q2},
            groups, endpoints, 0.8);
        CHECK(out.pairs.empty());
        CHECK(out.manifest.unpairable == 1);
    }

    SUBCASE("corpus and manifest files are written") {
        auto dir = testutil::temp_dir("forge_io");
        auto out = emit_preference_corpus({positive("q1")},
                                          {negative("q1", HallucinationCategory::faulty_reasoning, bad)},
                                          {q1, q2}, groups, endpoints, 0.8);
        save_preference_corpus(out, dir / "corpus.jsonl", dir / "manifest.json");
        CHECK(std::filesystem::exists(dir / "corpus.jsonl"));
        CHECK(std::filesystem::exists(dir / "manifest.json"));
    }
}
