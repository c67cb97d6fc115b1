#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pad {

enum class ErrorCode {
  kTerminalState,
  kBadToken,
  kBadVocab,
  kEmptyCorpus,
  kBadArgument,
  kDimMismatch,
  kEmptyBatch,
  kFrozenParameters,
  kStageOrder,
  kShapeMismatch,
  kUnknownDimension,
  kLengthMismatch,
  kBadSpec,
  kInsufficientData,
  kSchemaMismatch,
  kParse,
};

std::string_view error_code_name(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pad
