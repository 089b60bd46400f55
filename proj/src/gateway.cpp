#include "medtrust/gateway.hpp"

#include <chrono>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "medtrust/text.hpp"

namespace medtrust {

using nlohmann::json;

const char* agent_role_name(AgentRole role) {
    switch (role) {
        case AgentRole::verifier: return "verifier";
        case AgentRole::generator: return "generator";
        case AgentRole::nli: return "nli";
        case AgentRole::embedder: return "embedder";
        case AgentRole::dense_search: return "dense_search";
    }
    return "generator";
}

namespace fingerprints {

namespace {
constexpr char kSep = '\x1f';

std::string make(std::string_view task, std::initializer_list<std::string_view> parts) {
    std::string key(task);
    for (auto part : parts) {
        key.push_back(kSep);
        key.append(part);
    }
    return std::string(task) + ":" + fnv1a64_hex(key);
}
}  // namespace

std::string verifier(const std::string& model, const std::string& question) {
    return make("verify", {model, question});
}
std::string self_assess(const std::string& model, const std::string& question) {
    return make("self_assess", {model, question});
}
std::string generator(const std::string& model, const std::string& question, const std::string& reasoning) {
    return make("generate", {model, question, reasoning});
}
std::string draft(const std::string& model, const std::string& question,
                  const std::vector<std::string>& doc_ids) {
    return make("draft", {model, question, join(doc_ids, ",")});
}
std::string nli(const std::string& model, const std::string& premise, const std::string& hypothesis) {
    return make("nli", {model, premise, hypothesis});
}
std::string embed(const std::string& model, const std::string& text) {
    return make("embed", {model, text});
}
std::string dense(const std::string& model, const std::string& query) {
    return make("dense_search", {model, query});
}

}  // namespace fingerprints

// ---------------------------------------------------------------------------
// Transports
// ---------------------------------------------------------------------------

std::string HttpTransport::post(const AgentEndpoint& endpoint, const std::string& body) {
    httplib::Client client(endpoint.base_url);
    client.set_connection_timeout(0, endpoint.timeout_ms * 1000);
    client.set_read_timeout(endpoint.timeout_ms / 1000, (endpoint.timeout_ms % 1000) * 1000);
    client.set_write_timeout(endpoint.timeout_ms / 1000, (endpoint.timeout_ms % 1000) * 1000);

    auto res = client.Post("/agent", body, "application/json");
    if (!res) {
        auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
            err == httplib::Error::Write) {
            throw Error(ErrorCode::timeout, endpoint.base_url + ": " + httplib::to_string(err));
        }
        throw Error(ErrorCode::transport, endpoint.base_url + ": " + httplib::to_string(err));
    }
    if (res->status != 200) {
        throw Error(ErrorCode::transport,
                    endpoint.base_url + ": HTTP " + std::to_string(res->status));
    }
    return res->body;
}

void MockScript::add(const std::string& role, const std::string& fingerprint,
                     std::vector<std::string> responses, const std::string& note) {
    if (responses.empty()) {
        throw Error(ErrorCode::config_error, "mock entry needs at least one response");
    }
    std::string key = role + "|" + fingerprint;
    auto it = by_key_.find(key);
    if (it != by_key_.end()) {
        entries_[it->second].responses = std::move(responses);
        entries_[it->second].note = note;
        return;
    }
    by_key_.emplace(std::move(key), entries_.size());
    entries_.push_back({role, fingerprint, std::move(responses), note});
}

void MockScript::add_default(const std::string& role, std::string response) {
    add(role, "*", {std::move(response)});
}

MockScript MockScript::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::not_found, "cannot open mock script: " + path.string());

    MockScript script;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            throw Error(ErrorCode::malformed_record,
                        "mock script line " + std::to_string(line_no) + " is not a JSON object");
        }
        script.add(rec.at("role").get<std::string>(), rec.at("fingerprint").get<std::string>(),
                   rec.at("responses").get<std::vector<std::string>>(),
                   rec.value("note", std::string{}));
    }
    return script;
}

void MockScript::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error(ErrorCode::not_found, "cannot write mock script: " + path.string());
    for (const auto& entry : entries_) {
        json rec = {{"role", entry.role}, {"fingerprint", entry.fingerprint}, {"responses", entry.responses}};
        if (!entry.note.empty()) rec["note"] = entry.note;
        out << rec.dump() << '\n';
    }
}

const std::vector<std::string>* MockScript::find(const std::string& role,
                                                 const std::string& fingerprint) const {
    auto it = by_key_.find(role + "|" + fingerprint);
    if (it != by_key_.end()) return &entries_[it->second].responses;
    auto def = by_key_.find(role + "|*");
    if (def != by_key_.end()) return &entries_[def->second].responses;
    return nullptr;
}

std::string ScriptedMockTransport::post(const AgentEndpoint& endpoint, const std::string& body) {
    (void)endpoint;
    json req = json::parse(body);
    const std::string task = req.at("task").get<std::string>();
    const std::string fingerprint = req.at("fingerprint").get<std::string>();

    const auto* responses = script_.find(task, fingerprint);
    if (!responses) {
        throw Error(ErrorCode::mock_missing_key, task + " " + fingerprint);
    }

    size_t pos;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        size_t& cursor = cursors_[task + "|" + fingerprint];
        pos = std::min(cursor, responses->size() - 1);
        ++cursor;
    }
    json res = {{"ok", true}, {"content", (*responses)[pos]}};
    return res.dump();
}

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

PromptLibrary PromptLibrary::defaults() {
    PromptLibrary lib;
    lib.verifier =
        "You are a medical evidence verifier. You receive a question, its answer options, and a "
        "numbered list of retrieved documents.\n"
        "Decide whether the documents support a medically reliable, citation-grounded line of "
        "reasoning.\n"
        "If they do, respond with reasoning statements where every statement is immediately "
        "followed by its supporting citations written as [Doc N]: statement_1 [Doc 1] statement_2 "
        "[Doc 2] ...\n"
        "Every statement must carry at least one citation and each citation must clearly "
        "correspond to its source document.\n"
        "If the evidence is insufficient, respond with exactly this sentence: Insufficient "
        "evidence was identified in the retrieved content to support a medically reliable "
        "answer.\n"
        "In that case add one final line of the form \"GAPS: aspect_1; aspect_2\" naming between "
        "one and five short missing evidence aspects to retrieve next.";
    lib.generator =
        "You are a biomedical answer generator for multiple-choice questions.\n"
        "When validated reasoning is provided, rely on it exclusively; otherwise answer from your "
        "own medical knowledge.\n"
        "Respond with the single best option in the form: The answer is (X).";
    lib.self_assess =
        "Answer the multiple-choice question, assessing your answer against each listed "
        "reliability criterion before committing to it.\n"
        "Respond with the single best option in the form: The answer is (X).";
    lib.draft =
        "Synthesize reasoning for the question strictly from the provided numbered documents, "
        "writing inline citations as [Doc N] after each statement.\n"
        "If the documents cannot support an answer, respond with exactly this sentence: "
        "Insufficient evidence was identified in the retrieved content to support a medically "
        "reliable answer.";
    return lib;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
    auto read_or = [&](const char* name, std::string fallback) {
        std::ifstream in(dir / name);
        if (!in) return fallback;
        std::ostringstream buf;
        buf << in.rdbuf();
        return trim(buf.str());
    };
    PromptLibrary defaults = PromptLibrary::defaults();
    PromptLibrary lib;
    lib.verifier = read_or("verifier.txt", defaults.verifier);
    lib.generator = read_or("generator.txt", defaults.generator);
    lib.self_assess = read_or("self_assess.txt", defaults.self_assess);
    lib.draft = read_or("draft.txt", defaults.draft);
    return lib;
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

namespace {

json options_payload(const BenchmarkQuestion& question) {
    json opts = json::object();
    for (const auto& [label, text] : question.options) opts[label] = text;
    return opts;
}

json docs_payload(const std::vector<Document>& docs) {
    json arr = json::array();
    for (size_t i = 0; i < docs.size(); ++i) {
        arr.push_back({{"num", i + 1},
                       {"doc_id", docs[i].doc_id},
                       {"title", docs[i].title},
                       {"text", docs[i].text}});
    }
    return arr;
}

std::vector<std::string> doc_ids_of(const std::vector<Document>& docs) {
    std::vector<std::string> ids;
    ids.reserve(docs.size());
    for (const auto& d : docs) ids.push_back(d.doc_id);
    return ids;
}

VerifierOutput parse_verifier_response(const std::string& content, size_t num_docs) {
    auto [verdict_text, gap_terms] = split_gap_section(content);
    Verdict verdict = [&] {
        try {
            return parse_verdict(verdict_text, static_cast<int>(num_docs));
        } catch (const Error& e) {
            throw Error(ErrorCode::unparseable_verdict, content + " (" + e.what() + ")");
        }
    }();

    VerifierOutput out{std::move(verdict), std::nullopt, content};
    if (out.verdict.is_nka()) {
        out.gap = GapAnalysis{std::move(gap_terms)};
    }
    return out;
}

}  // namespace

AgentGateway::AgentGateway(std::shared_ptr<Transport> transport, PromptLibrary prompts)
    : transport_(std::move(transport)), prompts_(std::move(prompts)) {
    if (!transport_) throw Error(ErrorCode::config_error, "gateway needs a transport");
}

namespace {

// Holds one in-flight slot for an endpoint while alive.
class ConcurrencySlot {
public:
    ConcurrencySlot(std::mutex& mutex, std::condition_variable& cv, std::map<std::string, int>& counts,
                    std::string key, int cap)
        : mutex_(mutex), cv_(cv), counts_(counts), key_(std::move(key)), capped_(cap > 0) {
        if (!capped_) return;
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return counts_[key_] < cap; });
        ++counts_[key_];
    }
    ~ConcurrencySlot() {
        if (!capped_) return;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            --counts_[key_];
        }
        cv_.notify_one();
    }

private:
    std::mutex& mutex_;
    std::condition_variable& cv_;
    std::map<std::string, int>& counts_;
    std::string key_;
    bool capped_;
};

}  // namespace

std::string AgentGateway::dispatch(const AgentEndpoint& endpoint, const std::string& task,
                                   const std::string& fingerprint, const std::string& payload_json) {
    ConcurrencySlot slot(gate_mutex_, gate_cv_, in_flight_,
                         endpoint.model_name + "|" + endpoint.base_url, endpoint.max_concurrency);
    json req = {{"role", agent_role_name(endpoint.role)},
                {"task", task},
                {"model", endpoint.model_name},
                {"fingerprint", fingerprint},
                {"payload", json::parse(payload_json)}};
    const std::string body = req.dump();

    CallRecord record{task, endpoint.model_name, fingerprint, 0.0, "ok"};
    auto started = std::chrono::steady_clock::now();
    auto record_and_rethrow = [&](const Error& e) -> std::string {
        record.outcome = error_code_name(e.code());
        record.latency_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - started)
                                .count();
        {
            std::lock_guard<std::mutex> lock(log_mutex_);
            log_.push_back(record);
        }
        throw e;
    };

    std::string response_body;
    int attempt = 0;
    for (;;) {
        try {
            response_body = transport_->post(endpoint, body);
            break;
        } catch (const Error& e) {
            bool retryable = e.code() == ErrorCode::transport || e.code() == ErrorCode::timeout;
            if (!retryable || attempt >= endpoint.max_retries) {
                record_and_rethrow(e);
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(endpoint.backoff_ms << attempt));
            ++attempt;
        }
    }

    record.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

    json res = json::parse(response_body, nullptr, false);
    if (res.is_discarded() || !res.is_object() || !res.contains("ok")) {
        record_and_rethrow(Error(ErrorCode::transport, "malformed response body"));
    }
    if (!res.at("ok").get<bool>()) {
        record_and_rethrow(Error(ErrorCode::transport, res.value("content", std::string("remote error"))));
    }

    {
        std::lock_guard<std::mutex> lock(log_mutex_);
        log_.push_back(record);
    }
    return res.at("content").get<std::string>();
}

VerifierOutput AgentGateway::call_verifier(const AgentEndpoint& endpoint,
                                           const BenchmarkQuestion& question,
                                           const EvidenceSet& evidence) {
    if (evidence.docs.empty()) {
        throw Error(ErrorCode::config_error, "verifier requires a non-empty evidence set");
    }
    json payload = {{"question", question.question},
                    {"options", options_payload(question)},
                    {"docs", docs_payload(evidence.docs)},
                    {"prompt", prompts_.verifier}};
    auto fp = fingerprints::verifier(endpoint.model_name, question.question);
    std::string content = dispatch(endpoint, "verify", fp, payload.dump());
    return parse_verifier_response(content, evidence.docs.size());
}

std::string AgentGateway::call_generator(const AgentEndpoint& endpoint,
                                         const BenchmarkQuestion& question,
                                         const std::optional<Verdict>& reasoning) {
    if (reasoning && !reasoning->is_cite_reason()) {
        throw Error(ErrorCode::config_error, "generator only accepts citation-grounded reasoning");
    }
    const std::string reasoning_str = reasoning ? render_verdict(*reasoning) : std::string{};
    json payload = {{"question", question.question},
                    {"options", options_payload(question)},
                    {"prompt", prompts_.generator}};
    if (!reasoning_str.empty()) payload["reasoning"] = reasoning_str;

    auto fp = fingerprints::generator(endpoint.model_name, question.question, reasoning_str);
    std::string content = dispatch(endpoint, "generate", fp, payload.dump());
    return extract_answer_label(content);
}

std::string AgentGateway::call_self_assessment(const AgentEndpoint& endpoint,
                                               const BenchmarkQuestion& question,
                                               const std::vector<std::string>& criteria,
                                               const Decoding& decoding) {
    json payload = {{"question", question.question},
                    {"options", options_payload(question)},
                    {"criteria", criteria},
                    {"decoding",
                     {{"temperature", decoding.temperature},
                      {"top_k", decoding.top_k},
                      {"top_p", decoding.top_p}}},
                    {"prompt", prompts_.self_assess}};
    auto fp = fingerprints::self_assess(endpoint.model_name, question.question);
    std::string content = dispatch(endpoint, "self_assess", fp, payload.dump());
    return extract_answer_label(content);
}

VerifierOutput AgentGateway::draft_reasoning(const AgentEndpoint& endpoint,
                                             const BenchmarkQuestion& question,
                                             const std::vector<Document>& docs) {
    if (docs.empty()) throw Error(ErrorCode::config_error, "drafting requires documents");
    json payload = {{"question", question.question},
                    {"options", options_payload(question)},
                    {"docs", docs_payload(docs)},
                    {"prompt", prompts_.draft}};
    auto fp = fingerprints::draft(endpoint.model_name, question.question, doc_ids_of(docs));
    std::string content = dispatch(endpoint, "draft", fp, payload.dump());
    return parse_verifier_response(content, docs.size());
}

NliLabel AgentGateway::call_nli(const AgentEndpoint& endpoint,
                                const std::vector<std::string>& premise_parts,
                                const std::string& hypothesis) {
    if (premise_parts.empty()) {
        throw Error(ErrorCode::config_error, "entailment check requires a premise");
    }
    const std::string premise = join(premise_parts, kPremiseSeparator);
    json payload = {{"premise", premise}, {"hypothesis", hypothesis}};
    auto fp = fingerprints::nli(endpoint.model_name, premise, hypothesis);
    std::string content = dispatch(endpoint, "nli", fp, payload.dump());

    const std::string label = to_lower(trim(content));
    if (label == "entail" || label == "entailment") return NliLabel::entail;
    if (label == "not_entail" || label == "not entail") return NliLabel::not_entail;
    throw Error(ErrorCode::bad_label, content);
}

std::vector<double> AgentGateway::embed(const AgentEndpoint& endpoint, const std::string& text) {
    json payload = {{"text", text}};
    auto fp = fingerprints::embed(endpoint.model_name, text);
    std::string content = dispatch(endpoint, "embed", fp, payload.dump());

    json vec = json::parse(content, nullptr, false);
    if (vec.is_discarded() || !vec.is_array()) {
        throw Error(ErrorCode::malformed_record, "embedding response is not a JSON array");
    }
    std::vector<double> values;
    values.reserve(vec.size());
    for (const auto& v : vec) {
        if (!v.is_number()) throw Error(ErrorCode::malformed_record, "embedding contains non-numbers");
        values.push_back(v.get<double>());
    }

    const std::string key = endpoint.model_name + "|" + endpoint.base_url;
    size_t expected = endpoint.embed_dim;
    {
        std::lock_guard<std::mutex> lock(dims_mutex_);
        if (expected == 0) {
            auto [it, inserted] = seen_dims_.emplace(key, values.size());
            expected = it->second;
            (void)inserted;
        }
    }
    if (values.size() != expected) {
        throw Error(ErrorCode::dimension_mismatch,
                    "expected " + std::to_string(expected) + ", got " + std::to_string(values.size()));
    }
    return values;
}

RankedList AgentGateway::dense_search(const AgentEndpoint& endpoint, const std::string& query,
                                      size_t top_n) {
    json payload = {{"query", query}, {"top_n", top_n}};
    auto fp = fingerprints::dense(endpoint.model_name, query);
    std::string content = dispatch(endpoint, "dense_search", fp, payload.dump());

    json arr = json::parse(content, nullptr, false);
    if (arr.is_discarded() || !arr.is_array()) {
        throw Error(ErrorCode::malformed_record, "dense search response is not a JSON array");
    }
    RankedList list;
    list.retriever_id = endpoint.model_name;
    for (const auto& entry : arr) {
        if (!entry.is_array() || entry.size() != 2) {
            throw Error(ErrorCode::malformed_record, "dense search entries must be [doc_id, score]");
        }
        list.entries.push_back({entry.at(0).get<std::string>(), entry.at(1).get<double>()});
        if (list.entries.size() >= top_n) break;
    }
    list.validate();
    return list;
}

std::vector<CallRecord> AgentGateway::call_log() const {
    std::lock_guard<std::mutex> lock(log_mutex_);
    return log_;
}

std::string extract_answer_label(const std::string& text) {
    static const std::regex answer_is(R"(answer\s+is\s*:?\s*\(?\s*([A-Da-d])\b)",
                                      std::regex::icase);
    static const std::regex parenthesized(R"(\(\s*([A-Da-d])\s*\))");

    std::smatch m;
    if (std::regex_search(text, m, answer_is)) {
        return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(m[1].str()[0]))));
    }
    if (std::regex_search(text, m, parenthesized)) {
        return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(m[1].str()[0]))));
    }
    // Line-initial label: "B." / "B)" / "B:" or a line holding just the letter.
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        char c = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
        if (c < 'A' || c > 'D') continue;
        if (t.size() == 1 || t[1] == '.' || t[1] == ')' || t[1] == ':') {
            return std::string(1, c);
        }
    }
    throw Error(ErrorCode::no_label_found, text);
}

std::pair<std::string, std::vector<std::string>> split_gap_section(const std::string& raw) {
    std::istringstream lines(raw);
    std::string line;
    std::string verdict_text;
    std::vector<std::string> terms;
    bool found = false;
    while (std::getline(lines, line)) {
        std::string t = trim(line);
        if (!found && starts_with_icase(t, "GAPS:")) {
            found = true;
            std::string rest = t.substr(5);
            std::stringstream parts(rest);
            std::string term;
            while (std::getline(parts, term, ';')) {
                std::string cleaned = trim(term);
                if (!cleaned.empty() && terms.size() < 5) terms.push_back(std::move(cleaned));
            }
            continue;
        }
        if (!found) {
            if (!verdict_text.empty()) verdict_text += '\n';
            verdict_text += line;
        }
    }
    return {trim(verdict_text), std::move(terms)};
}

}  // namespace medtrust
