#pragma once

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "medtrust/error.hpp"

namespace medtrust {

/// Refusal sentence emitted when evidence cannot support a reliable answer.
/// Detection matches the leading words case-insensitively since model outputs
/// vary in their trailing phrasing.
inline constexpr const char* kNkaCanonicalText =
    "Insufficient evidence was identified in the retrieved content to support a medically reliable answer.";
inline constexpr const char* kNkaDetectionPrefix = "Insufficient evidence was identified";

/// One reasoning statement with its inline citations (1-based indices into
/// the evidence set that was presented alongside the question).
struct CiteStatement {
    std::string text;            // non-empty, no embedded citation tokens
    std::vector<int> citations;  // at least one, each within the presented doc count

    bool operator==(const CiteStatement&) const = default;
};

struct CiteReason {
    std::vector<CiteStatement> statements;  // at least one

    bool operator==(const CiteReason&) const = default;
};

struct NegativeKnowledgeAssertion {
    std::string text;

    bool operator==(const NegativeKnowledgeAssertion&) const = default;
};

/// The dual verdict: either citation-grounded reasoning or a refusal.
class Verdict {
public:
    static Verdict cite(std::vector<CiteStatement> statements);
    static Verdict nka(std::string text = kNkaCanonicalText);

    bool is_cite_reason() const { return std::holds_alternative<CiteReason>(value_); }
    bool is_nka() const { return std::holds_alternative<NegativeKnowledgeAssertion>(value_); }

    const CiteReason& cite_reason() const;
    const NegativeKnowledgeAssertion& assertion() const;

    bool operator==(const Verdict&) const = default;

private:
    std::variant<CiteReason, NegativeKnowledgeAssertion> value_;
};

/// Verifier's list of missing evidence aspects; drives query augmentation.
struct GapAnalysis {
    std::vector<std::string> missing_aspects;  // short retrievable concepts, capped at 5

    bool operator==(const GapAnalysis&) const = default;
};

/// Parse verdict text against an evidence set of `num_docs` documents.
///
/// Citation tokens follow the "[Doc N]" grammar with optional internal
/// spacing and case-insensitive "Doc". A statement's citations are the
/// maximal run of citation tokens immediately following its text. Text
/// matching the refusal prefix parses as a NegativeKnowledgeAssertion.
///
/// Throws Error with one of: empty_verdict, uncited_statement,
/// empty_statement, citation_out_of_range.
Verdict parse_verdict(const std::string& text, int num_docs);

/// Canonical rendering; parse_verdict(render_verdict(v), n) == v for valid v.
std::string render_verdict(const Verdict& verdict);

/// Union of all citation indices. Throws not_cite_reason on refusals.
std::set<int> cited_docs(const Verdict& verdict);

/// Statement texts joined with single spaces, citations stripped; the
/// natural-language form handed to entailment checks.
std::string reasoning_text(const Verdict& verdict);

}  // namespace medtrust
