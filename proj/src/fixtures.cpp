#include "medtrust/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_set>

#include "medtrust/eval.hpp"
#include "medtrust/medrank.hpp"
#include "medtrust/retrieval.hpp"
#include "medtrust/serde.hpp"
#include "medtrust/text.hpp"

namespace medtrust {

using nlohmann::json;

namespace {

// xorshift64: reproducible across platforms, unlike <random> distributions.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9E3779B97F4A7C15ULL) {}

    uint64_t next() {
        state_ ^= state_ << 13;
        state_ ^= state_ >> 7;
        state_ ^= state_ << 17;
        return state_;
    }

    size_t pick(size_t n) { return static_cast<size_t>(next() % n); }

private:
    uint64_t state_;
};

const char* kSyllables[] = {"zor", "val", "tri", "mek", "neb", "cul", "ra",  "din",
                            "pex", "lor", "quan", "bi", "sol", "ten", "mar", "vik"};

std::string make_term(Rng& rng, std::set<std::string>& used) {
    for (;;) {
        std::string term = std::string(kSyllables[rng.pick(16)]) + kSyllables[rng.pick(16)] +
                           kSyllables[rng.pick(16)];
        if (used.insert(term).second) return term;
    }
}

const std::vector<std::string> kLabels = {"A", "B", "C", "D"};

std::string wrong_label(const std::string& gold) {
    size_t idx = static_cast<size_t>(gold[0] - 'A');
    return kLabels[(idx + 1) % 4];
}

std::string answer_text(const std::string& label) { return "The answer is (" + label + ")."; }

enum class Scenario { missing_answer, over_refusal, misattribution, faulty, refusal_positive_faulty, benign };

struct QuestionPlan {
    int validated_round;    // -1 means every round fails
    bool unparseable_first; // first verifier response is malformed
    bool correct;           // generator returns the gold label
    bool nka_has_gaps;      // refusal rounds carry gap terms
    DifficultyGroup group;
    Scenario scenario;
};

// The hand-designed session table: 7 of 10 questions answer correctly,
// outcomes cover validation at t=0, t=1, t=2, malformed output, and fallback;
// forge scenarios plant exactly one negative per category with difficulty
// coverage over all three groups.
const QuestionPlan kPlans[10] = {
    {0, false, true, false, DifficultyGroup::stable, Scenario::missing_answer},        // q01
    {2, false, true, true, DifficultyGroup::stable, Scenario::over_refusal},           // q02
    {-1, false, true, true, DifficultyGroup::stable, Scenario::benign},                // q03
    {0, false, false, false, DifficultyGroup::medium, Scenario::misattribution},       // q04
    {-1, false, false, false, DifficultyGroup::medium, Scenario::refusal_positive_faulty},  // q05
    {0, false, true, false, DifficultyGroup::medium, Scenario::benign},                // q06
    {1, false, true, true, DifficultyGroup::medium, Scenario::benign},                 // q07
    {0, false, true, false, DifficultyGroup::challenging, Scenario::faulty},           // q08
    {1, true, true, false, DifficultyGroup::challenging, Scenario::benign},            // q09
    {-1, false, false, true, DifficultyGroup::challenging, Scenario::benign},          // q10
};

constexpr size_t kEmbedDim = 24;
constexpr size_t kMisattributionQuestion = 3;  // q04
constexpr double kDelta = 0.8;
constexpr size_t kForgeCandidates = 10;

std::string vec_to_json(const std::vector<double>& v) { return json(v).dump(); }

std::vector<double> doc_embedding(const std::string& doc_id) {
    std::vector<double> v(kEmbedDim, 0.0);
    if (doc_id[0] == 'd') {  // dNN_j -> axis of its question
        size_t q = static_cast<size_t>((doc_id[1] - '0') * 10 + (doc_id[2] - '0')) - 1;
        v[q] = 1.0;
    } else if (doc_id[0] == 'f') {  // f_KK -> its own axis
        size_t k = static_cast<size_t>((doc_id[2] - '0') * 10 + (doc_id[3] - '0')) - 1;
        v[10 + k] = 1.0;
    } else {  // x_J -> close to the misattribution question's axis
        size_t j = static_cast<size_t>(doc_id[2] - '0') - 1;
        double c = 0.94 - 0.004 * static_cast<double>(j);
        v[kMisattributionQuestion] = c;
        v[23] = std::sqrt(1.0 - c * c);
    }
    return v;
}

double local_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct Scripting {
    MockScript& script;

    void verifier_seq(const std::string& question, std::vector<std::string> responses) {
        script.add("verify", fingerprints::verifier(fixture_models::kVerifier, question),
                   std::move(responses), "verifier for: " + question.substr(0, 40));
    }
    void dense(const std::string& query, const std::vector<std::string>& ids) {
        json arr = json::array();
        double score = 1.0;
        for (const auto& id : ids) {
            arr.push_back({id, score});
            score -= 0.05;
        }
        script.add("dense_search", fingerprints::dense(fixture_models::kDense, query), {arr.dump()},
                   "dense for: " + query.substr(0, 40));
    }
    void generate(const std::string& question, const std::string& reasoning, const std::string& label) {
        script.add("generate", fingerprints::generator(fixture_models::kGenerator, question, reasoning),
                   {answer_text(label)});
    }
    void self_assess_seq(const std::string& question, const std::vector<std::string>& labels) {
        std::vector<std::string> responses;
        for (const auto& l : labels) responses.push_back(answer_text(l));
        script.add("self_assess",
                   fingerprints::self_assess(fixture_models::kSelfAssess, question), std::move(responses));
    }
    void nli(const std::string& premise, const std::string& hypothesis, bool entail) {
        script.add("nli", fingerprints::nli(fixture_models::kNli, premise, hypothesis),
                   {entail ? "entail" : "not_entail"});
    }
    void draft(const char* model, const std::string& question, const std::vector<std::string>& doc_ids,
               const std::string& text) {
        script.add("draft", fingerprints::draft(model, question, doc_ids), {text});
    }
    void embed(const std::string& text, const std::vector<double>& v) {
        script.add("embed", fingerprints::embed(fixture_models::kEmbedder, text), {vec_to_json(v)});
    }
};

std::string concat_texts(const std::vector<Document>& docs) {
    std::vector<std::string> texts;
    for (const auto& d : docs) texts.push_back(d.text);
    return join(texts, kPremiseSeparator);
}

}  // namespace

AgentEndpoint fixture_endpoint(AgentRole role, const char* model) {
    AgentEndpoint ep;
    ep.role = role;
    ep.base_url = "mock://";
    ep.model_name = model;
    ep.timeout_ms = 1000;
    ep.max_retries = 0;
    ep.backoff_ms = 1;
    return ep;
}

PipelineEndpoints fixture_pipeline_endpoints() {
    PipelineEndpoints eps;
    eps.verifier = fixture_endpoint(AgentRole::verifier, fixture_models::kVerifier);
    eps.base_verifier = fixture_endpoint(AgentRole::verifier, fixture_models::kBaseVerifier);
    eps.generator = fixture_endpoint(AgentRole::generator, fixture_models::kGenerator);
    return eps;
}

ForgeEndpoints fixture_forge_endpoints() {
    ForgeEndpoints eps;
    eps.primary_drafter = fixture_endpoint(AgentRole::generator, fixture_models::kPrimaryDrafter);
    eps.alt_drafter = fixture_endpoint(AgentRole::generator, fixture_models::kAltDrafter);
    eps.generator = fixture_endpoint(AgentRole::generator, fixture_models::kGenerator);
    eps.nli = fixture_endpoint(AgentRole::nli, fixture_models::kNli);
    eps.embedder = fixture_endpoint(AgentRole::embedder, fixture_models::kEmbedder);
    return eps;
}

AgentEndpoint fixture_dense_endpoint() {
    return fixture_endpoint(AgentRole::dense_search, fixture_models::kDense);
}

AgentEndpoint fixture_self_assess_endpoint() {
    return fixture_endpoint(AgentRole::generator, fixture_models::kSelfAssess);
}

FixtureBundle generate_fixtures(uint64_t seed) {
    Rng rng(seed * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL);
    FixtureBundle bundle;
    Scripting s{bundle.mocks};

    // ---- synthetic corpus and benchmark -----------------------------------
    std::set<std::string> used_terms;
    std::vector<std::string> conditions;
    std::vector<std::vector<std::string>> drugs(10);
    for (size_t i = 0; i < 10; ++i) {
        conditions.push_back(make_term(rng, used_terms) + "osis");
        for (size_t j = 0; j < 4; ++j) drugs[i].push_back(make_term(rng, used_terms) + "ine");
    }

    const Source kSources[] = {Source::pubmed, Source::statpearls, Source::textbook, Source::wikipedia};
    std::vector<BenchmarkQuestion> benchmark;
    for (size_t i = 0; i < 10; ++i) {
        BenchmarkQuestion q;
        q.q_id = "q" + std::string(i < 9 ? "0" : "") + std::to_string(i + 1);
        q.question = "Which therapy is first line management for " + conditions[i] + "?";
        for (size_t j = 0; j < 4; ++j) q.options[kLabels[j]] = drugs[i][j];
        q.gold = kLabels[rng.pick(4)];
        benchmark.push_back(std::move(q));
    }

    auto gold_drug = [&](size_t i) {
        return benchmark[i].options.at(benchmark[i].gold);
    };

    std::vector<Document> corpus;
    for (size_t i = 0; i < 10; ++i) {
        const std::string id_base = "d" + std::string(i < 9 ? "0" : "") + std::to_string(i + 1) + "_";
        const std::string& cond = conditions[i];
        std::vector<std::string> texts = {
            cond + " responds to " + gold_drug(i) + " as primary therapy in adult patients.",
            "Clinical outcomes of " + gold_drug(i) + " for " + cond + " support early use.",
            cond + " pathophysiology involves mechanisms modulated by " + drugs[i][1] + ".",
            "Comparative study of " + drugs[i][2] + " and " + gold_drug(i) + " in " + cond + " cohorts.",
        };
        for (size_t j = 0; j < 4; ++j) {
            corpus.push_back(
                {id_base + std::to_string(j + 1), cond + " report " + std::to_string(j + 1), texts[j],
                 kSources[(i + j) % 4]});
        }
    }
    for (size_t k = 1; k <= 10; ++k) {
        corpus.push_back({"f_" + std::string(k < 10 ? "0" : "") + std::to_string(k), "",
                          "Supportive therapy and management principles for first line care in adult "
                          "patients, part " +
                              std::to_string(k) + ".",
                          Source::other});
    }
    for (size_t j = 1; j <= 5; ++j) {
        corpus.push_back({"x_" + std::to_string(j), "",
                          "Microvesicular " + make_term(rng, used_terms) + " " +
                              make_term(rng, used_terms) + " baseline " + make_term(rng, used_terms) +
                              " cohort " + std::to_string(j) + ".",
                          Source::pubmed});
    }

    // ---- retrieval scripts (dense) and pipeline scripts -------------------
    for (size_t i = 0; i < 10; ++i) {
        const auto& q = benchmark[i];
        const auto& plan = kPlans[i];
        const std::string id_base = "d" + std::string(i < 9 ? "0" : "") + std::to_string(i + 1) + "_";
        std::vector<std::string> dedicated = {id_base + "2", id_base + "1", id_base + "4", id_base + "3"};

        s.dense(q.question, dedicated);

        Verdict cite = Verdict::cite(
            {{conditions[i] + " responds to " + gold_drug(i) + " as first line therapy", {1}},
             {"Guideline consensus supports early initiation", {2}}});
        const std::string cite_raw = render_verdict(cite);

        GapAnalysis gap{{"dose thresholds for " + conditions[i], "contraindication profile"}};
        const std::string nka_with_gaps =
            std::string(kNkaCanonicalText) + "\nGAPS: " + join(gap.missing_aspects, "; ");
        const std::string nka_plain = kNkaCanonicalText;

        std::vector<std::string> seq;
        for (int t = 0; t < 3; ++t) {
            if (plan.unparseable_first && t == 0) {
                seq.push_back("the retrieved material seems broadly relevant to the query");
                continue;
            }
            if (plan.validated_round == t) {
                seq.push_back(cite_raw);
                break;
            }
            seq.push_back(plan.nka_has_gaps ? nka_with_gaps : nka_plain);
        }
        s.verifier_seq(q.question, seq);

        if (plan.nka_has_gaps) {
            s.dense(augment_query(q.question, gap), dedicated);
        }

        const std::string final_label = plan.correct ? q.gold : wrong_label(q.gold);
        if (plan.validated_round >= 0) {
            s.generate(q.question, cite_raw, final_label);
        } else {
            s.generate(q.question, "", final_label);
        }
    }

    // ---- self-assessment scripts ------------------------------------------
    for (size_t i = 0; i < 10; ++i) {
        const auto& q = benchmark[i];
        std::vector<std::string> labels;
        switch (kPlans[i].group) {
            case DifficultyGroup::stable: labels = {q.gold, q.gold, q.gold, q.gold}; break;
            case DifficultyGroup::medium:
                labels = {q.gold, wrong_label(q.gold), q.gold, wrong_label(q.gold)};
                break;
            case DifficultyGroup::challenging: {
                std::string w = wrong_label(q.gold);
                labels = {w, w, w, w};
                break;
            }
        }
        s.self_assess_seq(q.question, labels);
    }

    // ---- embeddings ---------------------------------------------------------
    std::map<std::string, std::vector<double>> vectors;
    for (const auto& doc : corpus) {
        vectors[doc.doc_id] = doc_embedding(doc.doc_id);
        s.embed(doc.text, vectors[doc.doc_id]);
    }

    // ---- forge scripts ------------------------------------------------------
    CorpusStore store = CorpusStore::from_documents(corpus);
    SparseIndex index = SparseIndex::build(store);

    auto make_gateway = [&]() {
        return std::make_shared<AgentGateway>(
            std::make_shared<ScriptedMockTransport>(bundle.mocks));
    };
    auto make_retriever = [&](AgentGateway& gw) {
        HybridRetriever retriever(store, index, RetrievalConfig{});
        AgentEndpoint dense_ep = fixture_dense_endpoint();
        retriever.add_dense_client(dense_ep.model_name,
                                   [&gw, dense_ep](const std::string& query, size_t top_n) {
                                       return gw.dense_search(dense_ep, query, top_n);
                                   });
        return retriever;
    };

    // Candidates per question, then per-candidate entailment labels.
    std::vector<EvidenceSet> candidates_all(10);
    {
        auto gw = make_gateway();
        auto retriever = make_retriever(*gw);
        for (size_t i = 0; i < 10; ++i) {
            candidates_all[i] = retriever.retrieve(benchmark[i].question, kForgeCandidates, 0);
            const std::string hyp = nli_hypothesis(benchmark[i], benchmark[i].gold);
            for (const auto& doc : candidates_all[i].docs) {
                s.nli(doc.text, hyp, /*entail=*/doc.doc_id[0] == 'd');
            }
        }
    }

    // Compose document sets with the real algorithm, then script the
    // per-docset drafts and oracle outcomes for each planted scenario.
    {
        auto gw = make_gateway();
        AlignForge forge(store, *gw, fixture_forge_endpoints(),
                         ForgeConfig{kDelta, kForgeCandidates, 5, 1});
        for (size_t i = 0; i < 10; ++i) {
            const auto& q = benchmark[i];
            const auto& plan = kPlans[i];
            auto docsets = forge.compose_document_sets(q, candidates_all[i]);

            const bool stable = plan.group == DifficultyGroup::stable;
            if (stable || plan.scenario == Scenario::missing_answer) {
                s.generate(q.question, "", q.gold);  // parametric re-check for eligibility
            }

            for (size_t k = 0; k < docsets.size(); ++k) {
                const bool first = k == 0;
                const auto& docset = docsets[k];
                std::vector<Document> docs = forge.resolve(docset.doc_ids);
                const std::string concat = concat_texts(docs);
                const std::string subset_tag = "Subset " + std::to_string(k + 1);

                const bool primary_refuses =
                    plan.scenario == Scenario::refusal_positive_faulty ||
                    (plan.scenario == Scenario::misattribution && !first);
                Verdict primary =
                    primary_refuses
                        ? Verdict::nka()
                        : Verdict::cite({{gold_drug(i) + " improves outcomes in " + conditions[i], {1}},
                                         {subset_tag + " confirms dosing durability", {2}}});
                s.draft(fixture_models::kPrimaryDrafter, q.question, docset.doc_ids,
                        render_verdict(primary));
                if (primary.is_cite_reason()) {
                    s.generate(q.question, render_verdict(primary), q.gold);  // verification
                }

                const bool alt_refuses = plan.scenario == Scenario::over_refusal;
                Verdict alt =
                    alt_refuses
                        ? Verdict::nka()
                        : Verdict::cite(
                              {{"Alternative mechanism links " + drugs[i][1] + " to " + conditions[i],
                                {1, 2}},
                               {subset_tag + " suggests broader response", {3}}});
                s.draft(fixture_models::kAltDrafter, q.question, docset.doc_ids, render_verdict(alt));

                if (alt.is_cite_reason()) {
                    const bool faulty = first && (plan.scenario == Scenario::faulty ||
                                                  plan.scenario == Scenario::refusal_positive_faulty);
                    s.nli(concat, reasoning_text(alt), /*entail=*/!faulty);
                    if (stable || plan.scenario == Scenario::missing_answer) {
                        const bool missing = first && plan.scenario == Scenario::missing_answer;
                        s.generate(q.question, render_verdict(alt),
                                   missing ? wrong_label(q.gold) : q.gold);
                    }
                } else {
                    // Over-refusal check needs the primary rationale's own
                    // entailment; only the planted docset passes it.
                    s.nli(concat, reasoning_text(primary), /*entail=*/first);
                }

                if (plan.scenario == Scenario::misattribution && first) {
                    // Reproduce the distractor selection from the local
                    // vector table and plant the failing entailment.
                    std::vector<std::pair<double, const Document*>> scored;
                    std::unordered_set<std::string> member(docset.doc_ids.begin(), docset.doc_ids.end());
                    for (const auto& doc : store.documents()) {
                        if (member.count(doc.doc_id)) continue;
                        double best = -1.0;
                        for (const auto& id : docset.doc_ids) {
                            best = std::max(best, local_cosine(vectors[id], vectors[doc.doc_id]));
                        }
                        scored.emplace_back(best, &doc);
                    }
                    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second->doc_id < b.second->doc_id;
                    });
                    std::vector<Document> distractors;
                    for (size_t d = 0; d < 5 && d < scored.size(); ++d) {
                        distractors.push_back(*scored[d].second);
                    }
                    s.nli(concat_texts(distractors), reasoning_text(primary), /*entail=*/false);
                }
            }
        }
    }

    // ---- audit scripts over the simulated benchmark run ---------------------
    std::vector<AnswerRecord> sim_records;
    {
        auto gw = make_gateway();
        auto retriever = make_retriever(*gw);
        Pipeline pipeline(retriever, *gw, fixture_pipeline_endpoints(), PipelineConfig{});
        sim_records = pipeline.answer_batch(benchmark, 1);
        for (size_t i = 0; i < sim_records.size(); ++i) {
            const auto& record = sim_records[i];
            const auto& last = record.trace.rounds.back();
            std::vector<Document> shown;
            for (const auto& id : last.doc_ids) shown.push_back(store.get_document(id));
            if (record.final_verdict) {
                for (const auto& stmt : record.final_verdict->cite_reason().statements) {
                    std::set<int> cited(stmt.citations.begin(), stmt.citations.end());
                    std::vector<std::string> cited_texts;
                    for (int idx : cited) cited_texts.push_back(shown[static_cast<size_t>(idx - 1)].text);
                    s.nli(join(cited_texts, kPremiseSeparator), stmt.text, /*entail=*/true);
                }
            } else if (last.verdict_kind == "nka") {
                s.nli(concat_texts(shown), nli_hypothesis(benchmark[i], benchmark[i].gold),
                      /*entail=*/false);
            }
        }
    }

    // ---- consistency checks: the scripts must produce the snapshot ----------
    EvalReport sim_report = evaluate_records("fixture", sim_records);
    if (sim_report.em != 0.7) {
        throw Error(ErrorCode::config_error,
                    "fixture drift: scripted EM is " + std::to_string(sim_report.em));
    }
    for (size_t i = 0; i < 10; ++i) {
        const bool validated = kPlans[i].validated_round >= 0;
        const auto& row = sim_report.per_question[i];
        const int expect_rounds = validated ? kPlans[i].validated_round + 1 : 3;
        if (row.correct != kPlans[i].correct || row.rounds_used != expect_rounds ||
            row.outcome != (validated ? "validated" : "fallback")) {
            throw Error(ErrorCode::config_error, "fixture drift on " + row.q_id);
        }
    }

    StratifiedCorpus groups;
    for (size_t i = 0; i < 10; ++i) {
        switch (kPlans[i].group) {
            case DifficultyGroup::stable: groups.stable.push_back(benchmark[i].q_id); break;
            case DifficultyGroup::medium: groups.medium.push_back(benchmark[i].q_id); break;
            case DifficultyGroup::challenging: groups.challenging.push_back(benchmark[i].q_id); break;
        }
    }
    {
        auto gw = make_gateway();
        auto retriever = make_retriever(*gw);
        AlignForge forge(store, *gw, fixture_forge_endpoints(),
                         ForgeConfig{kDelta, kForgeCandidates, 5, 1});
        ForgeOutput out = forge.run(benchmark, groups, retriever);
        const auto& per = out.manifest.pairs_per_category;
        auto count = [&per](const char* name) {
            auto it = per.find(name);
            return it == per.end() ? size_t{0} : it->second;
        };
        if (out.manifest.pairs_total != 5 || count("faulty_reasoning") != 2 ||
            count("missing_answer") != 1 || count("over_refusal") != 1 ||
            count("misattribution") != 1) {
            throw Error(ErrorCode::config_error, "fixture drift in forge scenario counts");
        }
    }
    {
        auto gw = make_gateway();
        AuditOracles oracles{fixture_endpoint(AgentRole::nli, fixture_models::kNli),
                             fixture_endpoint(AgentRole::generator, fixture_models::kGenerator)};
        HallucinationReport audit = audit_hallucinations(sim_records, benchmark, store, *gw, oracles);
        if (audit.n_unauditable != 0 || audit.categories.at("missing_answer").count != 1 ||
            audit.categories.at("faulty_reasoning").count != 0 ||
            audit.categories.at("over_refusal").count != 0 ||
            audit.categories.at("misattribution").count != 0) {
            throw Error(ErrorCode::config_error, "fixture drift in audit scenario");
        }
    }

    // ---- snapshot ------------------------------------------------------------
    json per_question = json::array();
    for (size_t i = 0; i < 10; ++i) {
        const bool validated = kPlans[i].validated_round >= 0;
        per_question.push_back({{"q_id", benchmark[i].q_id},
                                {"correct", kPlans[i].correct},
                                {"rounds", validated ? kPlans[i].validated_round + 1 : 3},
                                {"outcome", validated ? "validated" : "fallback"}});
    }
    bundle.expected = {
        {"em", 0.7},
        {"n", 10},
        {"correct", 7},
        {"per_question", per_question},
        {"stratify",
         {{"stable", groups.stable}, {"medium", groups.medium}, {"challenging", groups.challenging}}},
        {"forge",
         {{"pairs_total", 5},
          {"pairs_per_category",
           {{"faulty_reasoning", 2}, {"missing_answer", 1}, {"over_refusal", 1}, {"misattribution", 1}}},
          {"negatives_per_group", {{"stable", 2}, {"medium", 2}, {"challenging", 1}}}}},
        {"audit",
         {{"faulty_reasoning", 0}, {"misattribution", 0}, {"missing_answer", 1}, {"over_refusal", 0}}}};

    bundle.corpus = std::move(corpus);
    bundle.benchmark = std::move(benchmark);
    return bundle;
}

void save_fixture_bundle(const FixtureBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    std::ofstream corpus(dir / "corpus.jsonl", std::ios::trunc | std::ios::binary);
    for (const auto& doc : bundle.corpus) {
        corpus << json{{"doc_id", doc.doc_id},
                       {"title", doc.title},
                       {"text", doc.text},
                       {"source", source_to_string(doc.source)}}
                      .dump()
               << '\n';
    }

    std::ofstream bench(dir / "benchmark.jsonl", std::ios::trunc | std::ios::binary);
    for (const auto& q : bundle.benchmark) {
        json opts = json::object();
        for (const auto& [label, text] : q.options) opts[label] = text;
        bench << json{{"q_id", q.q_id}, {"question", q.question}, {"options", opts}, {"gold", q.gold}}
                     .dump()
              << '\n';
    }

    bundle.mocks.save(dir / "mocks.jsonl");

    std::ofstream expected(dir / "expected.json", std::ios::trunc | std::ios::binary);
    expected << bundle.expected.dump(2) << '\n';

    std::ofstream config(dir / "config.json", std::ios::trunc | std::ios::binary);
    config << fixture_config_json().dump(2) << '\n';
}

nlohmann::json fixture_config_json() {
    auto ep = [](const char* role, const char* model) {
        return json{{"role", role},
                    {"base_url", "mock://"},
                    {"model_name", model},
                    {"timeout_ms", 1000},
                    {"max_retries", 0},
                    {"backoff_ms", 1}};
    };
    return json{
        {"endpoints",
         {{"verifier", ep("verifier", fixture_models::kVerifier)},
          {"base_verifier", ep("verifier", fixture_models::kBaseVerifier)},
          {"generator", ep("generator", fixture_models::kGenerator)},
          {"self_assess", ep("generator", fixture_models::kSelfAssess)},
          {"nli", ep("nli", fixture_models::kNli)},
          {"embedder", ep("embedder", fixture_models::kEmbedder)},
          {"primary_drafter", ep("generator", fixture_models::kPrimaryDrafter)},
          {"alt_drafter", ep("generator", fixture_models::kAltDrafter)},
          {"dense", json::array({ep("dense_search", fixture_models::kDense)})}}},
        {"retrieval", {{"depth", 32}, {"k_rrf", 60.0}, {"candidate_depth", 100}}},
        {"pipeline",
         {{"t_max", 3}, {"verifier_view", 5}, {"enable_iteration", true}, {"enable_mtam_verifier", true}}},
        {"forge", {{"delta", kDelta}, {"candidate_depth", kForgeCandidates}}}};
}

}  // namespace medtrust
