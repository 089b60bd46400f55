// medtrust: hybrid-retrieval question answering with citation-grounded
// verification, preference-corpus construction, and offline evaluation.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "medtrust/align_forge.hpp"
#include "medtrust/corpus.hpp"
#include "medtrust/dpo.hpp"
#include "medtrust/eval.hpp"
#include "medtrust/fixtures.hpp"
#include "medtrust/gateway.hpp"
#include "medtrust/medrank.hpp"
#include "medtrust/pipeline.hpp"
#include "medtrust/retrieval.hpp"
#include "medtrust/serde.hpp"

using nlohmann::json;
using namespace medtrust;

namespace {

constexpr const char* kIndexFile = "sparse_index.json";

struct CliConfig {
    std::string store_dir = "store";
    std::string mock_script;
    std::string templates_dir;
    RetrievalConfig retrieval;
    PipelineConfig pipeline;
    double forge_delta = 0.8;
    size_t forge_candidates = 10;
    size_t parallelism = 1;

    std::optional<AgentEndpoint> verifier, base_verifier, generator, self_assess, nli, embedder,
        primary_drafter, alt_drafter;
    std::vector<AgentEndpoint> dense;
};

AgentEndpoint endpoint_from_json(const json& j) {
    AgentEndpoint ep;
    const std::string role = j.value("role", std::string("generator"));
    if (role == "verifier") ep.role = AgentRole::verifier;
    else if (role == "nli") ep.role = AgentRole::nli;
    else if (role == "embedder") ep.role = AgentRole::embedder;
    else if (role == "dense_search") ep.role = AgentRole::dense_search;
    else ep.role = AgentRole::generator;
    ep.base_url = j.value("base_url", std::string{});
    ep.model_name = j.value("model_name", std::string{});
    ep.timeout_ms = j.value("timeout_ms", 30000);
    ep.max_retries = j.value("max_retries", 2);
    ep.backoff_ms = j.value("backoff_ms", 50);
    ep.embed_dim = j.value("embed_dim", size_t{0});
    return ep;
}

void load_config_file(CliConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::not_found, "config file: " + path);
    json j = json::parse(in);

    if (j.contains("store_dir")) cfg.store_dir = j.at("store_dir").get<std::string>();
    if (j.contains("templates_dir")) cfg.templates_dir = j.at("templates_dir").get<std::string>();
    if (j.contains("retrieval")) {
        const auto& r = j.at("retrieval");
        cfg.retrieval.depth = r.value("depth", cfg.retrieval.depth);
        cfg.retrieval.k_rrf = r.value("k_rrf", cfg.retrieval.k_rrf);
        cfg.retrieval.candidate_depth = r.value("candidate_depth", cfg.retrieval.candidate_depth);
    }
    if (j.contains("pipeline")) {
        const auto& p = j.at("pipeline");
        cfg.pipeline.t_max = p.value("t_max", cfg.pipeline.t_max);
        cfg.pipeline.depth = cfg.retrieval.depth;
        cfg.pipeline.verifier_view = p.value("verifier_view", cfg.pipeline.verifier_view);
        cfg.pipeline.enable_iteration = p.value("enable_iteration", cfg.pipeline.enable_iteration);
        cfg.pipeline.enable_mtam_verifier =
            p.value("enable_mtam_verifier", cfg.pipeline.enable_mtam_verifier);
    }
    if (j.contains("forge")) {
        const auto& f = j.at("forge");
        cfg.forge_delta = f.value("delta", cfg.forge_delta);
        cfg.forge_candidates = f.value("candidate_depth", cfg.forge_candidates);
    }
    if (j.contains("endpoints")) {
        const auto& eps = j.at("endpoints");
        auto get = [&](const char* name) -> std::optional<AgentEndpoint> {
            if (!eps.contains(name)) return std::nullopt;
            return endpoint_from_json(eps.at(name));
        };
        cfg.verifier = get("verifier");
        cfg.base_verifier = get("base_verifier");
        cfg.generator = get("generator");
        cfg.self_assess = get("self_assess");
        cfg.nli = get("nli");
        cfg.embedder = get("embedder");
        cfg.primary_drafter = get("primary_drafter");
        cfg.alt_drafter = get("alt_drafter");
        if (eps.contains("dense")) {
            for (const auto& d : eps.at("dense")) cfg.dense.push_back(endpoint_from_json(d));
        }
    }
}

std::shared_ptr<AgentGateway> make_gateway(const CliConfig& cfg) {
    std::shared_ptr<Transport> transport;
    if (!cfg.mock_script.empty()) {
        transport = std::make_shared<ScriptedMockTransport>(MockScript::load(cfg.mock_script));
    } else {
        transport = std::make_shared<HttpTransport>();
    }
    PromptLibrary prompts = cfg.templates_dir.empty() ? PromptLibrary::defaults()
                                                      : PromptLibrary::load(cfg.templates_dir);
    return std::make_shared<AgentGateway>(std::move(transport), std::move(prompts));
}

const AgentEndpoint& require_endpoint(const std::optional<AgentEndpoint>& ep, const char* name) {
    if (!ep) throw Error(ErrorCode::config_error, std::string("endpoint '") + name + "' not configured");
    return *ep;
}

struct RetrievalStack {
    CorpusStore store;
    SparseIndex index;
    std::unique_ptr<HybridRetriever> retriever;

    RetrievalStack(CorpusStore s, SparseIndex i) : store(std::move(s)), index(std::move(i)) {}
};

std::unique_ptr<RetrievalStack> open_retrieval(const CliConfig& cfg, AgentGateway* gateway) {
    auto store = CorpusStore::open(cfg.store_dir);
    auto index_path = std::filesystem::path(cfg.store_dir) / kIndexFile;
    SparseIndex index = std::filesystem::exists(index_path) ? SparseIndex::load(index_path)
                                                            : SparseIndex::build(store);

    auto stack = std::make_unique<RetrievalStack>(std::move(store), std::move(index));
    stack->retriever = std::make_unique<HybridRetriever>(stack->store, stack->index, cfg.retrieval);
    if (gateway) {
        for (const auto& dense_ep : cfg.dense) {
            stack->retriever->add_dense_client(
                dense_ep.model_name, [gateway, dense_ep](const std::string& query, size_t top_n) {
                    return gateway->dense_search(dense_ep, query, top_n);
                });
        }
    }
    return stack;
}

Pipeline make_pipeline(const CliConfig& cfg, const RetrievalStack& stack, AgentGateway& gateway) {
    PipelineEndpoints eps;
    eps.verifier = require_endpoint(cfg.verifier, "verifier");
    eps.base_verifier = cfg.base_verifier;
    eps.generator = require_endpoint(cfg.generator, "generator");
    PipelineConfig pipeline_cfg = cfg.pipeline;
    pipeline_cfg.depth = cfg.retrieval.depth;
    return Pipeline(*stack.retriever, gateway, eps, pipeline_cfg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"medtrust: verification-gated retrieval QA engine"};
    app.require_subcommand(1);
    app.fallthrough();

    CliConfig cfg;
    std::string config_path;
    if (const char* env = std::getenv("MEDTRUST_CONFIG")) config_path = env;

    app.add_option("--config", config_path, "JSON config file (or MEDTRUST_CONFIG)");
    app.add_option("--store", cfg.store_dir, "corpus store directory");
    app.add_option("--mock", cfg.mock_script, "scripted mock transport file");
    app.add_option("--parallelism", cfg.parallelism, "worker threads for batch commands");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate and persist a corpus file");
    std::string ingest_input;
    ingest->add_option("--input", ingest_input, "line-delimited corpus file")->required();

    // index
    auto* index_cmd = app.add_subcommand("index", "build and persist the sparse index");

    // retrieve
    auto* retrieve = app.add_subcommand("retrieve", "fused retrieval for one query");
    std::string retrieve_query;
    size_t retrieve_depth = 0;
    retrieve->add_option("--q", retrieve_query, "query text")->required();
    retrieve->add_option("--depth", retrieve_depth, "results to print (default: config depth)");

    // answer
    auto* answer = app.add_subcommand("answer", "answer one benchmark question");
    std::string answer_benchmark, answer_qid;
    answer->add_option("--benchmark", answer_benchmark, "benchmark file")->required();
    answer->add_option("--q-id", answer_qid, "question id (default: first)");

    // bench
    auto* bench = app.add_subcommand("bench", "run a benchmark and report exact match");
    std::string bench_benchmark, bench_name = "benchmark", bench_report, bench_records;
    bench->add_option("--benchmark", bench_benchmark, "benchmark file")->required();
    bench->add_option("--name", bench_name, "dataset name in the report");
    bench->add_option("--report", bench_report, "write the report JSON here");
    bench->add_option("--records", bench_records, "write per-question trace records here");

    // stratify
    auto* stratify = app.add_subcommand("stratify", "difficulty-stratify a benchmark");
    std::string strat_benchmark, strat_out = "stratification.jsonl", strat_rejects = "rejects.jsonl";
    size_t strat_k = 4;
    stratify->add_option("--benchmark", strat_benchmark, "benchmark file")->required();
    stratify->add_option("--k", strat_k, "self-assessment rounds");
    stratify->add_option("--out", strat_out, "output records file");
    stratify->add_option("--rejects", strat_rejects, "quarantine file");

    // forge-align
    auto* forge_cmd = app.add_subcommand("forge-align", "build the preference training corpus");
    std::string forge_benchmark, forge_groups, forge_out = "preference_corpus.jsonl",
                                               forge_manifest = "manifest.json";
    forge_cmd->add_option("--benchmark", forge_benchmark, "benchmark file")->required();
    forge_cmd->add_option("--groups", forge_groups, "stratification records file")->required();
    forge_cmd->add_option("--out", forge_out, "preference corpus output");
    forge_cmd->add_option("--manifest", forge_manifest, "manifest output");

    // dpo-check
    auto* dpo_cmd = app.add_subcommand("dpo-check", "evaluate the preference loss on logged pairs");
    std::string dpo_input;
    double dpo_beta = 0.1;
    dpo_cmd->add_option("--input", dpo_input, "JSON file {beta, pairs:[...]}")->required();
    dpo_cmd->add_option("--beta", dpo_beta, "preference sharpness (overrides file)");

    // audit
    auto* audit_cmd = app.add_subcommand("audit", "categorize hallucinations in answer records");
    std::string audit_records, audit_benchmark, audit_out;
    audit_cmd->add_option("--records", audit_records, "answer records file")->required();
    audit_cmd->add_option("--benchmark", audit_benchmark, "benchmark file")->required();
    audit_cmd->add_option("--out", audit_out, "write the audit report here");

    // fixtures
    auto* fixtures_cmd = app.add_subcommand("fixtures", "generate the offline fixture bundle");
    std::string fixtures_out = "fixtures";
    uint64_t fixtures_seed = 42;
    fixtures_cmd->add_option("--out", fixtures_out, "output directory");
    fixtures_cmd->add_option("--seed", fixtures_seed, "generation seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    try {
        if (!config_path.empty()) load_config_file(cfg, config_path);

        if (ingest->parsed()) {
            CorpusStats stats = CorpusStore::ingest(ingest_input, CorpusFormat::jsonl, cfg.store_dir);
            std::cout << json{{"doc_count", stats.doc_count},
                              {"total_tokens", stats.total_tokens},
                              {"avg_doc_len", stats.avg_doc_len}}
                             .dump()
                      << "\n";
        } else if (index_cmd->parsed()) {
            auto store = CorpusStore::open(cfg.store_dir);
            SparseIndex index = SparseIndex::build(store);
            index.save(std::filesystem::path(cfg.store_dir) / kIndexFile);
            std::cout << json{{"doc_count", index.doc_count()}, {"avg_doc_len", index.avg_doc_len()}}.dump()
                      << "\n";
        } else if (retrieve->parsed()) {
            auto gateway = cfg.dense.empty() ? nullptr : make_gateway(cfg);
            auto stack = open_retrieval(cfg, gateway.get());
            FusedRanking fused = stack->retriever->fuse(retrieve_query);
            size_t depth = retrieve_depth ? retrieve_depth : cfg.retrieval.depth;
            for (size_t i = 0; i < fused.entries.size() && i < depth; ++i) {
                std::cout << fused.entries[i].doc_id << "\t" << fused.entries[i].score << "\n";
            }
        } else if (answer->parsed()) {
            auto gateway = make_gateway(cfg);
            auto stack = open_retrieval(cfg, gateway.get());
            Pipeline pipeline = make_pipeline(cfg, *stack, *gateway);
            auto questions = load_benchmark(answer_benchmark);
            if (questions.empty()) throw Error(ErrorCode::empty_benchmark, answer_benchmark);
            const BenchmarkQuestion* chosen = answer_qid.empty() ? &questions.front() : nullptr;
            for (const auto& q : questions) {
                if (q.q_id == answer_qid) chosen = &q;
            }
            if (!chosen) throw Error(ErrorCode::not_found, "question '" + answer_qid + "'");
            AnswerRecord record = pipeline.answer_question(*chosen);
            std::cout << answer_record_to_json(record).dump(2) << "\n";
        } else if (bench->parsed()) {
            auto gateway = make_gateway(cfg);
            auto stack = open_retrieval(cfg, gateway.get());
            Pipeline pipeline = make_pipeline(cfg, *stack, *gateway);
            auto questions = load_benchmark(bench_benchmark);
            BenchmarkRun run = run_benchmark(bench_name, questions, pipeline, cfg.parallelism);
            if (!bench_report.empty()) save_eval_report(run.report, bench_report);
            if (!bench_records.empty()) save_answer_records(run.records, bench_records);
            std::cout << eval_report_to_json(run.report).dump(2) << "\n";
        } else if (stratify->parsed()) {
            auto gateway = make_gateway(cfg);
            auto questions = load_benchmark(strat_benchmark);
            StratifyConfig sc;
            sc.k = strat_k;
            sc.parallelism = cfg.parallelism;
            const AgentEndpoint& ep = require_endpoint(cfg.self_assess, "self_assess");
            StratifiedCorpus corpus = stratify_corpus(questions, *gateway, ep, sc);
            save_stratification(corpus, strat_out, strat_rejects);
            std::cout << json{{"stable", corpus.stable.size()},
                              {"medium", corpus.medium.size()},
                              {"challenging", corpus.challenging.size()},
                              {"rejected", corpus.rejected.size()}}
                             .dump()
                      << "\n";
        } else if (forge_cmd->parsed()) {
            auto gateway = make_gateway(cfg);
            auto stack = open_retrieval(cfg, gateway.get());
            auto questions = load_benchmark(forge_benchmark);
            StratifiedCorpus groups = load_stratification(forge_groups);
            ForgeEndpoints eps;
            eps.primary_drafter = require_endpoint(cfg.primary_drafter, "primary_drafter");
            eps.alt_drafter = require_endpoint(cfg.alt_drafter, "alt_drafter");
            eps.generator = require_endpoint(cfg.generator, "generator");
            eps.nli = require_endpoint(cfg.nli, "nli");
            eps.embedder = require_endpoint(cfg.embedder, "embedder");
            ForgeConfig fc;
            fc.delta = cfg.forge_delta;
            fc.candidate_depth = cfg.forge_candidates;
            fc.parallelism = cfg.parallelism;
            AlignForge forge(stack->store, *gateway, eps, fc);
            ForgeOutput out = forge.run(questions, groups, *stack->retriever);
            save_preference_corpus(out, forge_out, forge_manifest);
            std::cout << json{{"pairs", out.manifest.pairs_total},
                              {"positives", out.positives.size()},
                              {"negatives", out.negatives.size()},
                              {"unpairable", out.manifest.unpairable}}
                             .dump()
                      << "\n";
        } else if (dpo_cmd->parsed()) {
            std::ifstream in(dpo_input);
            if (!in) throw Error(ErrorCode::not_found, dpo_input);
            json j = json::parse(in);
            double beta = dpo_cmd->count("--beta") ? dpo_beta : j.value("beta", dpo_beta);
            std::vector<PairLogProbs> pairs;
            for (const auto& p : j.at("pairs")) {
                pairs.push_back({p.at("logp_policy_chosen").get<double>(),
                                 p.at("logp_ref_chosen").get<double>(),
                                 p.at("logp_policy_rejected").get<double>(),
                                 p.at("logp_ref_rejected").get<double>()});
            }
            // Inputs are unnormalized sequence log-probabilities; no length
            // normalization is applied here.
            std::cout << "# dpo-check: beta=" << beta
                      << ", inputs are raw sequence log-probabilities (not length-normalized)\n";
            double max_err = 0.0;
            for (size_t i = 0; i < pairs.size(); ++i) {
                DpoResult r = dpo_loss(pairs[i], beta);
                max_err = std::max(max_err, grad_check(pairs[i], beta, 1e-5));
                std::cout << "pair " << i << ": loss=" << r.loss << " margin=" << r.margin << "\n";
            }
            std::cout << "batch_loss=" << dpo_batch_loss(pairs, beta)
                      << " grad_check_max_rel_err=" << max_err << "\n";
        } else if (audit_cmd->parsed()) {
            auto gateway = make_gateway(cfg);
            auto store = CorpusStore::open(cfg.store_dir);
            auto questions = load_benchmark(audit_benchmark);
            auto records = load_answer_records(audit_records);
            AuditOracles oracles{require_endpoint(cfg.nli, "nli"),
                                 require_endpoint(cfg.generator, "generator")};
            HallucinationReport report = audit_hallucinations(records, questions, store,
                                                               *gateway, oracles, cfg.parallelism);
            if (!audit_out.empty()) save_hallucination_report(report, audit_out);
            std::cout << hallucination_report_to_json(report).dump(2) << "\n";
        } else if (fixtures_cmd->parsed()) {
            FixtureBundle bundle = generate_fixtures(fixtures_seed);
            save_fixture_bundle(bundle, fixtures_out);
            std::cout << json{{"dir", fixtures_out},
                              {"docs", bundle.corpus.size()},
                              {"questions", bundle.benchmark.size()},
                              {"mock_entries", bundle.mocks.size()}}
                             .dump()
                      << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
