#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vlmfair {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kDegenerateSubspace,
  kUnknownReference,
  kAntipodalCollapse,
  kDuplicateGroup,
  kDegenerateInput,
  kNonUnitInput,
  kEmptyCell,
  kUnknownLabel,
  kGroupAbsentFromCandidates,
  kMTooLarge,
  kEmptyGeneration,
  kMissingLabels,
  kEmptyCandidates,
  kDimensionTooSmall,
  kMalformedHeader,
  kMalformedRecord,
  kDuplicateId,
  kZeroVector,
  kMissingEmbedding,
  kIo,
  kInvariantViolation,
};

std::string_view to_string(ErrorCode code);

// Every library failure surfaces as this exception; the CLI maps codes to exit
// statuses (invariant violations are 3, everything else is a data error).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vlmfair
