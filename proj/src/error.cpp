#include "medtrust/error.hpp"

namespace medtrust {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::malformed_record: return "MalformedRecord";
        case ErrorCode::duplicate_doc_id: return "DuplicateDocId";
        case ErrorCode::empty_text: return "EmptyText";
        case ErrorCode::not_found: return "NotFound";
        case ErrorCode::missing_gold: return "MissingGold";
        case ErrorCode::bad_label: return "BadLabel";
        case ErrorCode::empty_corpus: return "EmptyCorpus";
        case ErrorCode::no_lists: return "NoLists";
        case ErrorCode::citation_out_of_range: return "CitationOutOfRange";
        case ErrorCode::uncited_statement: return "UncitedStatement";
        case ErrorCode::empty_statement: return "EmptyStatement";
        case ErrorCode::empty_verdict: return "EmptyVerdict";
        case ErrorCode::not_cite_reason: return "NotCiteReason";
        case ErrorCode::transport: return "Transport";
        case ErrorCode::timeout: return "Timeout";
        case ErrorCode::unparseable_verdict: return "UnparseableVerdict";
        case ErrorCode::no_label_found: return "NoLabelFound";
        case ErrorCode::dimension_mismatch: return "DimensionMismatch";
        case ErrorCode::mock_missing_key: return "MockMissingKey";
        case ErrorCode::empty_gap: return "EmptyGap";
        case ErrorCode::too_few_candidates: return "TooFewCandidates";
        case ErrorCode::empty_batch: return "EmptyBatch";
        case ErrorCode::empty_benchmark: return "EmptyBenchmark";
        case ErrorCode::non_finite_input: return "NonFiniteInput";
        case ErrorCode::config_error: return "ConfigError";
    }
    return "Error";
}

}  // namespace medtrust
