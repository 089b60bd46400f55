#include <doctest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "medtrust/eval.hpp"
#include "medtrust/fixtures.hpp"

using namespace medtrust;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct LoadedBundle {
    CorpusStore store;
    SparseIndex index;
    std::shared_ptr<AgentGateway> gateway;
    std::unique_ptr<HybridRetriever> retriever;
};

LoadedBundle load(const FixtureBundle& bundle) {
    LoadedBundle world{CorpusStore::from_documents(bundle.corpus), SparseIndex{}, nullptr, nullptr};
    world.index = SparseIndex::build(world.store);
    world.gateway =
        std::make_shared<AgentGateway>(std::make_shared<ScriptedMockTransport>(bundle.mocks));
    world.retriever = std::make_unique<HybridRetriever>(world.store, world.index, RetrievalConfig{});
    AgentEndpoint dense = fixture_dense_endpoint();
    auto gw = world.gateway;
    world.retriever->add_dense_client(dense.model_name,
                                      [gw, dense](const std::string& query, size_t top_n) {
                                          return gw->dense_search(dense, query, top_n);
                                      });
    return world;
}

}  // namespace

TEST_CASE("fixture generation is deterministic per seed") {
    FixtureBundle a = generate_fixtures(42);
    FixtureBundle b = generate_fixtures(42);

    auto dir_a = testutil::temp_dir("fx_a");
    auto dir_b = testutil::temp_dir("fx_b");
    save_fixture_bundle(a, dir_a);
    save_fixture_bundle(b, dir_b);

    for (const char* name : {"corpus.jsonl", "benchmark.jsonl", "mocks.jsonl", "expected.json"}) {
        CHECK(slurp(dir_a / name) == slurp(dir_b / name));
    }

    FixtureBundle c = generate_fixtures(7);
    CHECK(c.corpus[0].text != a.corpus[0].text);  // seed actually matters
    CHECK(c.expected.at("em") == a.expected.at("em"));  // structure does not
}

TEST_CASE("every pipeline outcome and scripted scenario is covered") {
    FixtureBundle bundle = generate_fixtures(42);
    CHECK(bundle.corpus.size() >= 50);
    CHECK(bundle.benchmark.size() == 10);

    auto world = load(bundle);
    Pipeline pipeline(*world.retriever, *world.gateway, fixture_pipeline_endpoints(), PipelineConfig{});
    auto records = pipeline.answer_batch(bundle.benchmark, 1);
    EvalReport report = evaluate_records("fixture", records);

    CHECK(report.em == 0.7);

    bool saw_round0 = false, saw_round2 = false, saw_fallback = false, saw_unparseable = false;
    for (const auto& record : records) {
        if (record.trace.outcome == PipelineOutcome::validated) {
            if (record.trace.rounds.size() == 1) saw_round0 = true;
            if (record.trace.rounds.size() == 3) saw_round2 = true;
        } else {
            saw_fallback = true;
        }
        for (const auto& round : record.trace.rounds) {
            if (round.verdict_kind == "unparseable") saw_unparseable = true;
        }
    }
    CHECK(saw_round0);
    CHECK(saw_round2);
    CHECK(saw_fallback);
    CHECK(saw_unparseable);
}

TEST_CASE("fixture scripts reference only documents that exist") {
    FixtureBundle bundle = generate_fixtures(42);
    auto world = load(bundle);
    for (const auto& q : bundle.benchmark) {
        RankedList dense = world.gateway->dense_search(fixture_dense_endpoint(), q.question, 100);
        CHECK_FALSE(dense.entries.empty());
        for (const auto& entry : dense.entries) {
            CHECK(world.store.contains(entry.doc_id));
        }
    }
}

TEST_CASE("forge over the bundle emits every hallucination category") {
    FixtureBundle bundle = generate_fixtures(42);
    auto world = load(bundle);

    StratifiedCorpus groups;
    for (const auto& id : bundle.expected.at("stratify").at("stable")) {
        groups.stable.push_back(id.get<std::string>());
    }
    for (const auto& id : bundle.expected.at("stratify").at("medium")) {
        groups.medium.push_back(id.get<std::string>());
    }
    for (const auto& id : bundle.expected.at("stratify").at("challenging")) {
        groups.challenging.push_back(id.get<std::string>());
    }

    AlignForge forge(world.store, *world.gateway, fixture_forge_endpoints(), ForgeConfig{0.8, 10, 5, 1});
    ForgeOutput out = forge.run(bundle.benchmark, groups, *world.retriever);

    const auto expected = bundle.expected.at("forge");
    CHECK(out.manifest.pairs_total == expected.at("pairs_total").get<size_t>());
    for (const auto& [name, count] : expected.at("pairs_per_category").items()) {
        CHECK(out.manifest.pairs_per_category.at(name) == count.get<size_t>());
    }
    for (const auto& [name, count] : expected.at("negatives_per_group").items()) {
        CHECK(out.manifest.negatives_per_group.at(name) == count.get<size_t>());
    }
    for (const auto& sample : out.negatives) {
        CHECK(revalidate(sample));
    }
}

TEST_CASE("stratification over the bundle matches the plan") {
    FixtureBundle bundle = generate_fixtures(42);
    auto world = load(bundle);

    StratifyConfig config;
    StratifiedCorpus corpus =
        stratify_corpus(bundle.benchmark, *world.gateway, fixture_self_assess_endpoint(), config);

    CHECK(corpus.stable == bundle.expected.at("stratify").at("stable").get<std::vector<std::string>>());
    CHECK(corpus.medium == bundle.expected.at("stratify").at("medium").get<std::vector<std::string>>());
    CHECK(corpus.challenging ==
          bundle.expected.at("stratify").at("challenging").get<std::vector<std::string>>());
}
