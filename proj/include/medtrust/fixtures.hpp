#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "medtrust/align_forge.hpp"
#include "medtrust/corpus.hpp"
#include "medtrust/gateway.hpp"
#include "medtrust/pipeline.hpp"

namespace medtrust {

/// Model names the fixture scripts are keyed on. Endpoint configs used
/// against the bundle must carry exactly these names.
namespace fixture_models {
inline constexpr const char* kVerifier = "mtam-verifier";
inline constexpr const char* kBaseVerifier = "base-verifier";
inline constexpr const char* kGenerator = "answer-gen";
inline constexpr const char* kSelfAssess = "self-assess-model";
inline constexpr const char* kNli = "nli-judge";
inline constexpr const char* kEmbedder = "article-encoder";
inline constexpr const char* kDense = "dense-retriever";
inline constexpr const char* kPrimaryDrafter = "primary-drafter";
inline constexpr const char* kAltDrafter = "alt-drafter";
}  // namespace fixture_models

/// Desk-scale synthetic corpus, benchmark, and mock scripts that make every
/// subsystem runnable offline: ten questions covering validation at round 0,
/// validation after refinement, malformed verifier output, and parametric
/// fallback; plus scripted scenarios for each negative-sample category and a
/// stratification split over all three difficulty groups.
struct FixtureBundle {
    std::vector<Document> corpus;
    std::vector<BenchmarkQuestion> benchmark;
    MockScript mocks;
    nlohmann::json expected;  // snapshot values the scripts are built to produce
};

/// Deterministic in content given the seed. Scripts are derived by running
/// the real retrieval, composition, and pipeline code during generation, so
/// they stay consistent with implementation behavior by construction.
FixtureBundle generate_fixtures(uint64_t seed);

/// Writes corpus.jsonl, benchmark.jsonl, mocks.jsonl, expected.json and a
/// ready-to-use config.json into `dir`.
void save_fixture_bundle(const FixtureBundle& bundle, const std::filesystem::path& dir);

AgentEndpoint fixture_endpoint(AgentRole role, const char* model);
PipelineEndpoints fixture_pipeline_endpoints();
ForgeEndpoints fixture_forge_endpoints();
AgentEndpoint fixture_dense_endpoint();
AgentEndpoint fixture_self_assess_endpoint();

/// CLI endpoint configuration matching the bundle's mock scripts.
nlohmann::json fixture_config_json();

}  // namespace medtrust
