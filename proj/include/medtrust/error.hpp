#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medtrust {

// Every failure crossing a module boundary carries one of these codes so
// callers can branch on the condition instead of parsing message text.
enum class ErrorCode {
    // corpus_store
    malformed_record,
    duplicate_doc_id,
    empty_text,
    not_found,
    missing_gold,
    bad_label,
    // retrieval
    empty_corpus,
    no_lists,
    // verdict model
    citation_out_of_range,
    uncited_statement,
    empty_statement,
    empty_verdict,
    not_cite_reason,
    // gateway
    transport,
    timeout,
    unparseable_verdict,
    no_label_found,
    dimension_mismatch,
    mock_missing_key,
    // pipeline / builders
    empty_gap,
    too_few_candidates,
    empty_batch,
    empty_benchmark,
    non_finite_input,
    config_error,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string detail)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
          code_(code),
          detail_(std::move(detail)) {}

    ErrorCode code() const { return code_; }
    const std::string& detail() const { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace medtrust
