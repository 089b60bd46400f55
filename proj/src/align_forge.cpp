#include "medtrust/align_forge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "medtrust/parallel.hpp"
#include "medtrust/text.hpp"

namespace medtrust {

using nlohmann::json;

const char* hallucination_category_name(HallucinationCategory category) {
    switch (category) {
        case HallucinationCategory::faulty_reasoning: return "faulty_reasoning";
        case HallucinationCategory::missing_answer: return "missing_answer";
        case HallucinationCategory::over_refusal: return "over_refusal";
        case HallucinationCategory::misattribution: return "misattribution";
    }
    return "faulty_reasoning";
}

HallucinationCategory hallucination_category_from_name(const std::string& name) {
    if (name == "faulty_reasoning") return HallucinationCategory::faulty_reasoning;
    if (name == "missing_answer") return HallucinationCategory::missing_answer;
    if (name == "over_refusal") return HallucinationCategory::over_refusal;
    if (name == "misattribution") return HallucinationCategory::misattribution;
    throw Error(ErrorCode::malformed_record, "unknown hallucination category '" + name + "'");
}

bool revalidate(const NegativeSample& sample) {
    const auto& e = sample.evidence;
    switch (sample.category) {
        case HallucinationCategory::faulty_reasoning:
            return e.nli_label && *e.nli_label == NliLabel::not_entail;
        case HallucinationCategory::missing_answer:
            return e.answer_with_reasoning && e.answer_parametric &&
                   *e.answer_with_reasoning != *e.answer_parametric;
        case HallucinationCategory::over_refusal:
            return e.nli_label && *e.nli_label == NliLabel::entail && e.answer_with_reasoning &&
                   e.answer_parametric && *e.answer_with_reasoning == *e.answer_parametric;
        case HallucinationCategory::misattribution:
            return e.similarity && e.delta && *e.similarity > *e.delta && e.nli_label &&
                   *e.nli_label == NliLabel::not_entail;
    }
    return false;
}

std::string nli_hypothesis(const BenchmarkQuestion& question, const std::string& label) {
    auto it = question.options.find(label);
    if (it == question.options.end()) {
        throw Error(ErrorCode::bad_label, "no option '" + label + "' on " + question.q_id);
    }
    return question.question + "\nAnswer: " + it->second;
}

namespace {

std::vector<std::string> texts_of(const std::vector<Document>& docs) {
    std::vector<std::string> texts;
    texts.reserve(docs.size());
    for (const auto& d : docs) texts.push_back(d.text);
    return texts;
}

std::vector<std::string> ids_of(const std::vector<Document>& docs) {
    std::vector<std::string> ids;
    ids.reserve(docs.size());
    for (const auto& d : docs) ids.push_back(d.doc_id);
    return ids;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    const size_t n = std::min(a.size(), b.size());
    for (size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

AlignForge::AlignForge(const CorpusStore& store, AgentGateway& gateway, ForgeEndpoints endpoints,
                       ForgeConfig config)
    : store_(&store), gateway_(&gateway), endpoints_(std::move(endpoints)), config_(config) {
    if (config_.candidate_depth < 5) {
        throw Error(ErrorCode::config_error, "composition needs at least five candidates");
    }
}

std::vector<Document> AlignForge::resolve(const std::vector<std::string>& doc_ids) const {
    std::vector<Document> docs;
    docs.reserve(doc_ids.size());
    for (const auto& id : doc_ids) docs.push_back(store_->get_document(id));
    return docs;
}

std::vector<ComposedDocSet> AlignForge::compose_document_sets(const BenchmarkQuestion& question,
                                                              const EvidenceSet& candidates) const {
    if (candidates.docs.size() < 5) {
        throw Error(ErrorCode::too_few_candidates,
                    question.q_id + ": " + std::to_string(candidates.docs.size()) + " candidates");
    }

    const std::string hypothesis = nli_hypothesis(question, question.gold);

    // One entailment label per candidate, in fused-rank order.
    std::vector<std::pair<const Document*, NliLabel>> labeled;
    labeled.reserve(candidates.docs.size());
    for (const auto& doc : candidates.docs) {
        NliLabel label = gateway_->call_nli(endpoints_.nli, {doc.text}, hypothesis);
        labeled.emplace_back(&doc, label);
    }

    std::vector<const Document*> entailing, non_entailing;
    for (const auto& [doc, label] : labeled) {
        (label == NliLabel::entail ? entailing : non_entailing).push_back(doc);
    }

    static const std::pair<int, int> kCompositions[] = {{5, 0}, {4, 1}, {3, 2}, {2, 3}, {1, 4}, {0, 5}};

    std::vector<ComposedDocSet> sets;
    for (const auto& [n_entail, n_not] : kCompositions) {
        if (static_cast<int>(entailing.size()) < n_entail ||
            static_cast<int>(non_entailing.size()) < n_not) {
            continue;
        }
        std::unordered_set<const Document*> chosen;
        for (int i = 0; i < n_entail; ++i) chosen.insert(entailing[static_cast<size_t>(i)]);
        for (int i = 0; i < n_not; ++i) chosen.insert(non_entailing[static_cast<size_t>(i)]);

        ComposedDocSet set;
        set.q_id = question.q_id;
        set.n_entail = n_entail;
        set.n_not_entail = n_not;
        // Keep candidate (fused-rank) order inside the subset.
        for (const auto& [doc, label] : labeled) {
            if (!chosen.count(doc)) continue;
            set.doc_ids.push_back(doc->doc_id);
            set.labels.push_back(label);
        }
        sets.push_back(std::move(set));
    }
    return sets;
}

std::optional<Verdict> AlignForge::draft(const AgentEndpoint& drafter, const BenchmarkQuestion& question,
                                         const std::vector<Document>& docs) const {
    try {
        return gateway_->draft_reasoning(drafter, question, docs).verdict;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::unparseable_verdict) return std::nullopt;
        throw;
    }
}

bool AlignForge::verify_positive(const BenchmarkQuestion& question, const Verdict& reasoning) const {
    try {
        return gateway_->call_generator(endpoints_.generator, question, reasoning) == question.gold;
    } catch (const Error&) {
        return false;  // unverified, never a crash in a data build
    }
}

std::optional<NegativeSample> AlignForge::build_faulty_reasoning(const BenchmarkQuestion& question,
                                                                 const std::vector<Document>& docs) const {
    auto alt_verdict = draft(endpoints_.alt_drafter, question, docs);
    if (!alt_verdict || !alt_verdict->is_cite_reason()) return std::nullopt;

    NliLabel label = gateway_->call_nli(endpoints_.nli, texts_of(docs), reasoning_text(*alt_verdict));
    if (label != NliLabel::not_entail) return std::nullopt;

    NegativeSample sample;
    sample.q_id = question.q_id;
    sample.doc_ids = ids_of(docs);
    sample.verdict = *alt_verdict;
    sample.category = HallucinationCategory::faulty_reasoning;
    sample.evidence.nli_label = label;
    sample.drafter_model = endpoints_.alt_drafter.model_name;
    return sample;
}

std::optional<NegativeSample> AlignForge::build_missing_answer(const BenchmarkQuestion& question,
                                                               std::optional<DifficultyGroup> group,
                                                               const std::vector<Document>& docs) const {
    if (!group || *group != DifficultyGroup::stable) return std::nullopt;

    std::string parametric = gateway_->call_generator(endpoints_.generator, question, std::nullopt);
    if (parametric != question.gold) return std::nullopt;  // no longer consistently correct

    auto alt_verdict = draft(endpoints_.alt_drafter, question, docs);
    if (!alt_verdict || !alt_verdict->is_cite_reason()) return std::nullopt;

    std::string with_reasoning = gateway_->call_generator(endpoints_.generator, question, *alt_verdict);
    if (with_reasoning == parametric) return std::nullopt;

    NegativeSample sample;
    sample.q_id = question.q_id;
    sample.doc_ids = ids_of(docs);
    sample.verdict = *alt_verdict;
    sample.category = HallucinationCategory::missing_answer;
    sample.evidence.answer_with_reasoning = with_reasoning;
    sample.evidence.answer_parametric = parametric;
    sample.drafter_model = endpoints_.alt_drafter.model_name;
    return sample;
}

std::optional<NegativeSample> AlignForge::build_over_refusal(const BenchmarkQuestion& question,
                                                             const std::vector<Document>& docs) const {
    auto primary_verdict = draft(endpoints_.primary_drafter, question, docs);
    if (!primary_verdict || !primary_verdict->is_cite_reason()) return std::nullopt;

    auto alt_verdict = draft(endpoints_.alt_drafter, question, docs);
    if (!alt_verdict || !alt_verdict->is_nka()) return std::nullopt;

    NliLabel label =
        gateway_->call_nli(endpoints_.nli, texts_of(docs), reasoning_text(*primary_verdict));
    if (label != NliLabel::entail) return std::nullopt;

    std::string with_reasoning =
        gateway_->call_generator(endpoints_.generator, question, *primary_verdict);
    std::string parametric = gateway_->call_generator(endpoints_.generator, question, std::nullopt);
    if (with_reasoning != parametric) return std::nullopt;

    NegativeSample sample;
    sample.q_id = question.q_id;
    sample.doc_ids = ids_of(docs);
    sample.verdict = *alt_verdict;  // the refusal despite sufficient evidence
    sample.category = HallucinationCategory::over_refusal;
    sample.evidence.nli_label = label;
    sample.evidence.answer_with_reasoning = with_reasoning;
    sample.evidence.answer_parametric = parametric;
    sample.drafter_model = endpoints_.alt_drafter.model_name;
    return sample;
}

double AlignForge::set_similarity(const std::vector<Document>& source,
                                  const std::vector<Document>& distractors) const {
    if (source.empty() || distractors.empty()) {
        throw Error(ErrorCode::config_error, "similarity needs two non-empty document sets");
    }
    std::vector<std::vector<double>> source_vecs;
    source_vecs.reserve(source.size());
    for (const auto& doc : source) source_vecs.push_back(gateway_->embed(endpoints_.embedder, doc.text));

    double total = 0.0;
    for (const auto& doc : distractors) {
        auto vec = gateway_->embed(endpoints_.embedder, doc.text);
        double best = -1.0;
        for (const auto& src : source_vecs) best = std::max(best, cosine(src, vec));
        total += best;
    }
    return total / static_cast<double>(distractors.size());
}

std::optional<NegativeSample> AlignForge::build_misattribution(const BenchmarkQuestion& question,
                                                               const std::vector<Document>& docs,
                                                               const Verdict& reasoning) const {
    if (!reasoning.is_cite_reason()) {
        throw Error(ErrorCode::not_cite_reason, "misattribution requires citation-grounded reasoning");
    }

    std::unordered_set<std::string> in_source;
    for (const auto& doc : docs) in_source.insert(doc.doc_id);

    std::vector<std::vector<double>> source_vecs;
    source_vecs.reserve(docs.size());
    for (const auto& doc : docs) source_vecs.push_back(gateway_->embed(endpoints_.embedder, doc.text));

    // Rank every other stored document by its best cosine against the source
    // set; the top few form the distractor set.
    std::vector<std::pair<double, const Document*>> scored;
    for (const auto& doc : store_->documents()) {
        if (in_source.count(doc.doc_id)) continue;
        auto vec = gateway_->embed(endpoints_.embedder, doc.text);
        double best = -1.0;
        for (const auto& src : source_vecs) best = std::max(best, cosine(src, vec));
        scored.emplace_back(best, &doc);
    }
    if (scored.empty()) return std::nullopt;
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second->doc_id < b.second->doc_id;
    });

    std::vector<Document> distractors;
    double sim_total = 0.0;
    for (size_t i = 0; i < scored.size() && distractors.size() < config_.distractor_set_size; ++i) {
        distractors.push_back(*scored[i].second);
        sim_total += scored[i].first;
    }
    const double similarity = sim_total / static_cast<double>(distractors.size());
    if (!(similarity > config_.delta)) return std::nullopt;

    NliLabel label =
        gateway_->call_nli(endpoints_.nli, texts_of(distractors), reasoning_text(reasoning));
    if (label != NliLabel::not_entail) return std::nullopt;

    NegativeSample sample;
    sample.q_id = question.q_id;
    sample.doc_ids = ids_of(distractors);
    sample.verdict = reasoning;
    sample.category = HallucinationCategory::misattribution;
    sample.evidence.nli_label = label;
    sample.evidence.similarity = similarity;
    sample.evidence.delta = config_.delta;
    sample.evidence.source_doc_ids = ids_of(docs);
    sample.drafter_model = endpoints_.primary_drafter.model_name;
    return sample;
}

ForgeOutput AlignForge::run(const std::vector<BenchmarkQuestion>& questions,
                            const StratifiedCorpus& groups, const HybridRetriever& retriever) const {
    struct PerQuestion {
        std::vector<PositiveSample> positives;
        std::vector<NegativeSample> negatives;
        std::vector<std::string> log;
    };

    auto results = parallel_map<PerQuestion>(questions.size(), config_.parallelism, [&](size_t i) {
        const BenchmarkQuestion& question = questions[i];
        PerQuestion out;
        try {
            EvidenceSet candidates = retriever.retrieve(question.question, config_.candidate_depth, 0);
            auto docsets = compose_document_sets(question, candidates);
            auto group = groups.group_of(question.q_id);

            for (const auto& docset : docsets) {
                std::vector<Document> docs = resolve(docset.doc_ids);

                auto primary_verdict = draft(endpoints_.primary_drafter, question, docs);
                if (!primary_verdict) {
                    out.log.push_back(question.q_id + ": primary draft quarantined (unparseable)");
                } else if (primary_verdict->is_cite_reason()) {
                    if (verify_positive(question, *primary_verdict)) {
                        out.positives.push_back({question.q_id, docset.doc_ids, *primary_verdict,
                                                 endpoints_.primary_drafter.model_name});
                    }
                    if (auto sample = build_misattribution(question, docs, *primary_verdict)) {
                        out.negatives.push_back(std::move(*sample));
                    }
                } else {
                    // A principled refusal from the primary drafter is itself
                    // a positive target.
                    out.positives.push_back({question.q_id, docset.doc_ids, *primary_verdict,
                                             endpoints_.primary_drafter.model_name});
                }

                if (auto sample = build_faulty_reasoning(question, docs)) {
                    out.negatives.push_back(std::move(*sample));
                }
                if (auto sample = build_missing_answer(question, group, docs)) {
                    out.negatives.push_back(std::move(*sample));
                }
                if (auto sample = build_over_refusal(question, docs)) {
                    out.negatives.push_back(std::move(*sample));
                }
            }
        } catch (const std::exception& e) {
            out.log.push_back(question.q_id + ": skipped (" + e.what() + ")");
        }
        return out;
    });

    std::vector<PositiveSample> positives;
    std::vector<NegativeSample> negatives;
    std::vector<std::string> log;
    for (auto& r : results) {
        std::move(r.positives.begin(), r.positives.end(), std::back_inserter(positives));
        std::move(r.negatives.begin(), r.negatives.end(), std::back_inserter(negatives));
        std::move(r.log.begin(), r.log.end(), std::back_inserter(log));
    }

    ForgeOutput output = emit_preference_corpus(std::move(positives), std::move(negatives), questions,
                                                groups, endpoints_, config_.delta);
    output.log.insert(output.log.begin(), log.begin(), log.end());
    return output;
}

ForgeOutput emit_preference_corpus(std::vector<PositiveSample> positives,
                                   std::vector<NegativeSample> negatives,
                                   const std::vector<BenchmarkQuestion>& questions,
                                   const StratifiedCorpus& groups, const ForgeEndpoints& endpoints,
                                   double delta, const PairingPolicy& policy) {
    ForgeOutput output;
    output.manifest.delta = delta;
    output.manifest.endpoints = {{"primary_drafter", endpoints.primary_drafter.model_name},
                                 {"alt_drafter", endpoints.alt_drafter.model_name},
                                 {"generator", endpoints.generator.model_name},
                                 {"nli", endpoints.nli.model_name},
                                 {"embedder", endpoints.embedder.model_name}};

    std::unordered_map<std::string, const BenchmarkQuestion*> question_by_id;
    for (const auto& q : questions) question_by_id.emplace(q.q_id, &q);

    std::unordered_map<std::string, std::vector<const PositiveSample*>> positives_by_q;
    for (const auto& p : positives) {
        positives_by_q[p.q_id].push_back(&p);
        if (p.verdict.is_cite_reason()) {
            ++output.manifest.positives_cite_reason;
        } else {
            ++output.manifest.positives_nka;
        }
    }
    std::unordered_map<std::string, std::vector<const NegativeSample*>> negatives_by_q;
    for (const auto& n : negatives) {
        negatives_by_q[n.q_id].push_back(&n);
        auto group = groups.group_of(n.q_id);
        ++output.manifest.negatives_per_group[group ? difficulty_group_name(*group) : "unknown"];
    }
    output.manifest.negatives_total = negatives.size();

    std::unordered_set<const NegativeSample*> paired;

    static const HallucinationCategory kOrder[] = {
        HallucinationCategory::faulty_reasoning, HallucinationCategory::missing_answer,
        HallucinationCategory::over_refusal, HallucinationCategory::misattribution};

    for (const auto& question : questions) {
        auto neg_it = negatives_by_q.find(question.q_id);
        auto pos_it = positives_by_q.find(question.q_id);
        if (neg_it == negatives_by_q.end()) continue;
        if (pos_it == positives_by_q.end()) continue;

        for (auto category : kOrder) {
            size_t emitted = 0;
            for (const NegativeSample* neg : neg_it->second) {
                if (neg->category != category) continue;
                if (emitted >= policy.max_pairs_per_category_per_question) break;

                // Prefer a citation-grounded positive built over the same
                // document set, then any distinct one, then a refusal (which
                // can never oppose a rejected refusal). A misattributed
                // rationale repeats the positive's text under foreign
                // documents, so identical verdicts are never paired.
                const PositiveSample* chosen = nullptr;
                for (const PositiveSample* pos : pos_it->second) {
                    if (!pos->verdict.is_cite_reason() || pos->verdict == neg->verdict) continue;
                    if (pos->doc_ids == neg->doc_ids) {
                        chosen = pos;
                        break;
                    }
                    if (!chosen) chosen = pos;
                }
                if (!chosen && !neg->verdict.is_nka()) {
                    for (const PositiveSample* pos : pos_it->second) {
                        if (pos->verdict.is_nka() && !(pos->verdict == neg->verdict)) {
                            chosen = pos;
                            break;
                        }
                    }
                }
                if (!chosen) continue;

                PreferencePair pair;
                pair.q_id = question.q_id;
                pair.question = question.question;
                pair.options = question.options;
                pair.doc_ids = neg->doc_ids;
                pair.chosen = chosen->verdict;
                pair.rejected = neg->verdict;
                pair.category = category;
                pair.provenance_chosen = chosen->drafter_model;
                pair.provenance_rejected = neg->drafter_model;
                output.pairs.push_back(std::move(pair));
                paired.insert(neg);
                ++emitted;
                ++output.manifest.pairs_per_category[hallucination_category_name(category)];
            }
        }
    }

    for (const auto& neg : negatives) {
        if (!paired.count(&neg)) {
            ++output.manifest.unpairable;
            output.log.push_back(neg.q_id + ": unpairable " +
                                 hallucination_category_name(neg.category) + " sample");
        }
    }
    for (const auto& pos : positives) {
        if (!negatives_by_q.count(pos.q_id)) {
            output.log.push_back(pos.q_id + ": positive with no negative, no pair emitted");
        }
    }

    output.manifest.pairs_total = output.pairs.size();
    output.positives = std::move(positives);
    output.negatives = std::move(negatives);
    return output;
}

void save_preference_corpus(const ForgeOutput& output, const std::filesystem::path& corpus_path,
                            const std::filesystem::path& manifest_path) {
    std::ofstream corpus(corpus_path, std::ios::trunc | std::ios::binary);
    if (!corpus) throw Error(ErrorCode::not_found, "cannot write corpus: " + corpus_path.string());
    for (const auto& pair : output.pairs) {
        json opts = json::object();
        for (const auto& [label, text] : pair.options) opts[label] = text;
        json rec = {{"q_id", pair.q_id},
                    {"prompt", {{"question", pair.question}, {"options", opts}, {"docs", pair.doc_ids}}},
                    {"chosen_text", render_verdict(pair.chosen)},
                    {"rejected_text", render_verdict(pair.rejected)},
                    {"category", hallucination_category_name(pair.category)},
                    {"provenance",
                     {{"chosen", pair.provenance_chosen}, {"rejected", pair.provenance_rejected}}}};
        corpus << rec.dump() << '\n';
    }

    const auto& m = output.manifest;
    json manifest = {{"pairs_total", m.pairs_total},
                     {"pairs_per_category", m.pairs_per_category},
                     {"negatives_per_group", m.negatives_per_group},
                     {"positives", {{"cite_reason", m.positives_cite_reason}, {"nka", m.positives_nka}}},
                     {"negatives_total", m.negatives_total},
                     {"unpairable", m.unpairable},
                     {"delta", m.delta},
                     {"endpoints", m.endpoints}};
    std::ofstream man(manifest_path, std::ios::trunc | std::ios::binary);
    if (!man) throw Error(ErrorCode::not_found, "cannot write manifest: " + manifest_path.string());
    man << manifest.dump(2) << '\n';
}

}  // namespace medtrust
