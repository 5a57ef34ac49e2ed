#include "vlmfair/error.hpp"

namespace vlmfair {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDegenerateSubspace: return "DegenerateSubspace";
    case ErrorCode::kUnknownReference: return "UnknownReference";
    case ErrorCode::kAntipodalCollapse: return "AntipodalCollapse";
    case ErrorCode::kDuplicateGroup: return "DuplicateGroup";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kNonUnitInput: return "NonUnitInput";
    case ErrorCode::kEmptyCell: return "EmptyCell";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kGroupAbsentFromCandidates: return "GroupAbsentFromCandidates";
    case ErrorCode::kMTooLarge: return "MTooLarge";
    case ErrorCode::kEmptyGeneration: return "EmptyGeneration";
    case ErrorCode::kMissingLabels: return "MissingLabels";
    case ErrorCode::kEmptyCandidates: return "EmptyCandidates";
    case ErrorCode::kDimensionTooSmall: return "DimensionTooSmall";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kMissingEmbedding: return "MissingEmbedding";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

}  // namespace vlmfair
