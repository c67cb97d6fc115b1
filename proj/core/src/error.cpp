#include "pad/error.hpp"

namespace pad {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTerminalState: return "TerminalState";
    case ErrorCode::kBadToken: return "BadToken";
    case ErrorCode::kBadVocab: return "BadVocab";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kBadArgument: return "BadArgument";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kFrozenParameters: return "FrozenParameters";
    case ErrorCode::kStageOrder: return "StageOrder";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kUnknownDimension: return "UnknownDimension";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kBadSpec: return "BadSpec";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kParse: return "Parse";
  }
  return "Unknown";
}

}  // namespace pad
