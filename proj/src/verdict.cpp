#include "medtrust/verdict.hpp"

#include <cctype>

#include "medtrust/text.hpp"

namespace medtrust {

namespace {

struct CitationToken {
    size_t begin = 0;  // position of '['
    size_t end = 0;    // one past ']'
    int index = 0;
};

// Match "[Doc N]" at `pos`: '[' ws* "doc" ws* digits ws* ']', "doc" matched
// case-insensitively. Returns token on success.
std::optional<CitationToken> match_citation(const std::string& text, size_t pos) {
    if (text[pos] != '[') return std::nullopt;
    size_t i = pos + 1;
    auto skip_ws = [&] {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    skip_ws();
    static const char* kWord = "doc";
    for (int w = 0; w < 3; ++w, ++i) {
        if (i >= text.size() || std::tolower(static_cast<unsigned char>(text[i])) != kWord[w]) {
            return std::nullopt;
        }
    }
    skip_ws();
    size_t digits_begin = i;
    long value = 0;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
        value = value * 10 + (text[i] - '0');
        if (value > 1'000'000) value = 1'000'001;  // clamp; bounds check rejects later
        ++i;
    }
    if (i == digits_begin) return std::nullopt;
    skip_ws();
    if (i >= text.size() || text[i] != ']') return std::nullopt;
    return CitationToken{pos, i + 1, static_cast<int>(value)};
}

bool only_whitespace(const std::string& text, size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
        if (!std::isspace(static_cast<unsigned char>(text[i]))) return false;
    }
    return true;
}

}  // namespace

Verdict Verdict::cite(std::vector<CiteStatement> statements) {
    Verdict v;
    v.value_ = CiteReason{std::move(statements)};
    return v;
}

Verdict Verdict::nka(std::string text) {
    Verdict v;
    v.value_ = NegativeKnowledgeAssertion{std::move(text)};
    return v;
}

const CiteReason& Verdict::cite_reason() const {
    if (!is_cite_reason()) throw Error(ErrorCode::not_cite_reason, "verdict is a refusal");
    return std::get<CiteReason>(value_);
}

const NegativeKnowledgeAssertion& Verdict::assertion() const {
    if (!is_nka()) throw Error(ErrorCode::not_cite_reason, "verdict is citation-grounded reasoning");
    return std::get<NegativeKnowledgeAssertion>(value_);
}

Verdict parse_verdict(const std::string& text, int num_docs) {
    std::string body = trim(text);
    if (body.empty()) throw Error(ErrorCode::empty_verdict, "verdict text is empty");

    if (starts_with_icase(body, kNkaDetectionPrefix)) {
        return Verdict::nka(body);
    }

    std::vector<CitationToken> tokens;
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '[') continue;
        if (auto tok = match_citation(body, i)) {
            tokens.push_back(*tok);
            i = tok->end - 1;
        }
    }
    if (tokens.empty()) {
        throw Error(ErrorCode::uncited_statement, "no citations found in verdict text");
    }

    // Group consecutive tokens separated only by whitespace into runs; the
    // text preceding each run is that run's statement.
    std::vector<CiteStatement> statements;
    size_t cursor = 0;
    size_t t = 0;
    while (t < tokens.size()) {
        size_t run_begin = t;
        while (t + 1 < tokens.size() &&
               only_whitespace(body, tokens[t].end, tokens[t + 1].begin)) {
            ++t;
        }
        size_t run_end = t;

        CiteStatement stmt;
        stmt.text = trim(std::string_view(body).substr(cursor, tokens[run_begin].begin - cursor));
        if (stmt.text.empty()) {
            throw Error(ErrorCode::empty_statement, "citation run has no preceding statement text");
        }
        for (size_t r = run_begin; r <= run_end; ++r) {
            int idx = tokens[r].index;
            if (idx < 1 || idx > num_docs) {
                throw Error(ErrorCode::citation_out_of_range, std::to_string(idx));
            }
            stmt.citations.push_back(idx);
        }
        statements.push_back(std::move(stmt));
        cursor = tokens[run_end].end;
        ++t;
    }

    if (!only_whitespace(body, cursor, body.size())) {
        throw Error(ErrorCode::uncited_statement,
                    "trailing text without citation: '" + trim(body.substr(cursor)) + "'");
    }
    return Verdict::cite(std::move(statements));
}

std::string render_verdict(const Verdict& verdict) {
    if (verdict.is_nka()) return verdict.assertion().text;

    std::string out;
    const auto& statements = verdict.cite_reason().statements;
    for (size_t i = 0; i < statements.size(); ++i) {
        if (i) out += ' ';
        out += statements[i].text;
        out += ' ';
        for (size_t c = 0; c < statements[i].citations.size(); ++c) {
            out += "[Doc " + std::to_string(statements[i].citations[c]) + "]";
        }
    }
    return out;
}

std::set<int> cited_docs(const Verdict& verdict) {
    std::set<int> docs;
    for (const auto& stmt : verdict.cite_reason().statements) {
        docs.insert(stmt.citations.begin(), stmt.citations.end());
    }
    return docs;
}

std::string reasoning_text(const Verdict& verdict) {
    if (verdict.is_nka()) return verdict.assertion().text;
    std::string out;
    for (const auto& stmt : verdict.cite_reason().statements) {
        if (!out.empty()) out += ' ';
        out += stmt.text;
    }
    return out;
}

}  // namespace medtrust
