#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "medtrust/corpus.hpp"
#include "medtrust/retrieval.hpp"
#include "medtrust/verdict.hpp"

namespace medtrust {

enum class AgentRole { verifier, generator, nli, embedder, dense_search };

const char* agent_role_name(AgentRole role);

struct AgentEndpoint {
    AgentRole role = AgentRole::generator;
    std::string base_url;     // empty when a mock transport is in use
    std::string model_name;
    int timeout_ms = 30000;
    int max_retries = 2;
    int backoff_ms = 50;      // doubled per retry
    size_t embed_dim = 0;     // 0: fix the dimension from the first response
    int max_concurrency = 0;  // in-flight request cap per endpoint, 0: unlimited
};

struct VerifierOutput {
    Verdict verdict;
    std::optional<GapAnalysis> gap;  // present exactly when the verdict is a refusal
    std::string raw;                 // unmodified response text, kept for traces
};

enum class NliLabel { entail, not_entail };

struct Decoding {
    double temperature = 0.0;
    int top_k = 40;
    double top_p = 0.9;
};

/// Separator used when multiple premise parts are concatenated for one
/// entailment call. Part of the wire contract: mock scripts key on it.
inline constexpr const char* kPremiseSeparator = "\n\n";

/// Request fingerprints: stable identifiers computed from the semantic
/// request fields (never from prompt boilerplate), used both as the call-log
/// request hash and as the lookup key for scripted mocks.
namespace fingerprints {
std::string verifier(const std::string& model, const std::string& question);
std::string self_assess(const std::string& model, const std::string& question);
std::string generator(const std::string& model, const std::string& question,
                      const std::string& reasoning /* "" for parametric */);
std::string draft(const std::string& model, const std::string& question,
                  const std::vector<std::string>& doc_ids);
std::string nli(const std::string& model, const std::string& premise, const std::string& hypothesis);
std::string embed(const std::string& model, const std::string& text);
std::string dense(const std::string& model, const std::string& query);
}  // namespace fingerprints

/// Transport carries one serialized request to a model service and returns
/// the raw response body. Requests are JSON objects {role, task, fingerprint,
/// payload}; responses are {ok, content}.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::string post(const AgentEndpoint& endpoint, const std::string& body) = 0;
};

/// Plain HTTP POST to <base_url>/agent.
class HttpTransport : public Transport {
public:
    std::string post(const AgentEndpoint& endpoint, const std::string& body) override;
};

/// Scripted responses keyed by (role, fingerprint). Each key holds a response
/// sequence consumed call by call; once exhausted the last response repeats,
/// so single-entry keys behave as constant functions. A record with
/// fingerprint "*" acts as the default for its role.
class MockScript {
public:
    void add(const std::string& role, const std::string& fingerprint,
             std::vector<std::string> responses, const std::string& note = "");
    void add_default(const std::string& role, std::string response);

    static MockScript load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    /// nullptr when neither the key nor a role default exists.
    const std::vector<std::string>* find(const std::string& role, const std::string& fingerprint) const;

    size_t size() const { return entries_.size(); }

private:
    struct Entry {
        std::string role;
        std::string fingerprint;
        std::vector<std::string> responses;
        std::string note;
    };
    std::vector<Entry> entries_;                       // file order, for save()
    std::map<std::string, size_t> by_key_;             // role|fingerprint -> entry
};

class ScriptedMockTransport : public Transport {
public:
    explicit ScriptedMockTransport(MockScript script) : script_(std::move(script)) {}

    std::string post(const AgentEndpoint& endpoint, const std::string& body) override;

private:
    MockScript script_;
    std::mutex mutex_;
    std::map<std::string, size_t> cursors_;  // role|fingerprint -> next response
};

struct CallRecord {
    std::string task;
    std::string model;
    std::string fingerprint;
    double latency_ms = 0.0;
    std::string outcome;  // "ok" or an error code name
};

/// Prompt texts sent with each task. Defaults are compiled in; a template
/// directory with verifier.txt / generator.txt / self_assess.txt / draft.txt
/// overrides them.
struct PromptLibrary {
    std::string verifier;
    std::string generator;
    std::string self_assess;
    std::string draft;

    static PromptLibrary defaults();
    static PromptLibrary load(const std::filesystem::path& dir);
};

/// The one boundary to external model services. Every call is retried up to
/// the endpoint's max_retries on transport failures, recorded in the call
/// log, and returns typed results or throws a typed Error.
class AgentGateway {
public:
    explicit AgentGateway(std::shared_ptr<Transport> transport,
                          PromptLibrary prompts = PromptLibrary::defaults());

    /// Evidence must be non-empty; the verdict is parsed against its size.
    VerifierOutput call_verifier(const AgentEndpoint& endpoint, const BenchmarkQuestion& question,
                                 const EvidenceSet& evidence);

    /// Returns an option label. `reasoning`, when present, must be
    /// citation-grounded; absent means parametric fallback.
    std::string call_generator(const AgentEndpoint& endpoint, const BenchmarkQuestion& question,
                               const std::optional<Verdict>& reasoning);

    /// One self-assessment round under the given decoding parameters.
    std::string call_self_assessment(const AgentEndpoint& endpoint, const BenchmarkQuestion& question,
                                     const std::vector<std::string>& criteria, const Decoding& decoding);

    /// Draft a verdict (reasoning or refusal) over a fixed document set.
    VerifierOutput draft_reasoning(const AgentEndpoint& endpoint, const BenchmarkQuestion& question,
                                   const std::vector<Document>& docs);

    /// Premise parts are concatenated with kPremiseSeparator in given order.
    NliLabel call_nli(const AgentEndpoint& endpoint, const std::vector<std::string>& premise_parts,
                      const std::string& hypothesis);

    std::vector<double> embed(const AgentEndpoint& endpoint, const std::string& text);

    RankedList dense_search(const AgentEndpoint& endpoint, const std::string& query, size_t top_n);

    std::vector<CallRecord> call_log() const;

    const PromptLibrary& prompts() const { return prompts_; }

private:
    std::string dispatch(const AgentEndpoint& endpoint, const std::string& task,
                         const std::string& fingerprint, const std::string& payload_json);

    std::shared_ptr<Transport> transport_;
    PromptLibrary prompts_;

    mutable std::mutex log_mutex_;
    std::vector<CallRecord> log_;

    std::mutex dims_mutex_;
    std::map<std::string, size_t> seen_dims_;  // per-endpoint inferred embedding size

    std::mutex gate_mutex_;
    std::condition_variable gate_cv_;
    std::map<std::string, int> in_flight_;  // per-endpoint active request counts
};

/// First standalone A-D letter in the patterns "answer is X", "(X)", or a
/// line starting with "X." / "X)" / "X:". Throws no_label_found otherwise.
std::string extract_answer_label(const std::string& text);

/// Split a raw verifier response into verdict text and optional gap terms
/// given on a "GAPS:" line (semicolon-separated, capped at five).
std::pair<std::string, std::vector<std::string>> split_gap_section(const std::string& raw);

}  // namespace medtrust
