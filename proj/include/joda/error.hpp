#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace joda {

/// Broad failure class. The CLI maps each class to an exit code.
enum class ErrorClass {
  kValidation,  // bad input data or schema violations
  kIo,
  kNetwork,
  kNumerical,  // diverged integration
};

enum class ErrorCode {
  kInvalidKnots,
  kInsufficientKnots,
  kOutOfSpan,
  kDegenerateRange,
  kUnknownTemplate,
  kParse,
  kValidation,
  kUnsupportedVersion,
  kUnknownLabel,
  kUnknownKind,
  kIo,
  kNetwork,
  kUnparseableProposal,
  kDiverged,
};

std::string_view to_string(ErrorCode code);
ErrorClass error_class(ErrorCode code);

/// Single exception type for the library. `path` carries the JSON path or
/// file path the error refers to, when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string path = {});

  ErrorCode code() const noexcept { return code_; }
  ErrorClass error_class() const noexcept { return joda::error_class(code_); }
  const std::string& path() const noexcept { return path_; }

 private:
  ErrorCode code_;
  std::string path_;
};

}  // namespace joda
