#include "joda/error.hpp"

#include <utility>

namespace joda {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidKnots: return "invalid_knots";
    case ErrorCode::kInsufficientKnots: return "insufficient_knots";
    case ErrorCode::kOutOfSpan: return "out_of_span";
    case ErrorCode::kDegenerateRange: return "degenerate_range";
    case ErrorCode::kUnknownTemplate: return "unknown_template";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kValidation: return "validation_error";
    case ErrorCode::kUnsupportedVersion: return "unsupported_version";
    case ErrorCode::kUnknownLabel: return "unknown_label";
    case ErrorCode::kUnknownKind: return "unknown_kind";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kNetwork: return "network_error";
    case ErrorCode::kUnparseableProposal: return "unparseable_proposal";
    case ErrorCode::kDiverged: return "integration_diverged";
  }
  return "unknown";
}

ErrorClass error_class(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return ErrorClass::kIo;
    case ErrorCode::kNetwork:
    case ErrorCode::kUnparseableProposal: return ErrorClass::kNetwork;
    case ErrorCode::kDiverged: return ErrorClass::kNumerical;
    default: return ErrorClass::kValidation;
  }
}

Error::Error(ErrorCode code, std::string message, std::string path)
    : std::runtime_error(std::move(message)), code_(code), path_(std::move(path)) {}

}  // namespace joda
