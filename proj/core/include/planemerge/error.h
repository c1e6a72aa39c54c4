#pragma once

#include <stdexcept>
#include <string>

namespace planemerge {

enum class ErrorCode {
  kDegenerateConfiguration,
  kPointAtInfinity,
  kPureRotation,
  kDecompositionFailed,
  kInsufficientMatches,
  kExcessiveDegeneracy,
  kEmbeddingFailed,
  kTooFewPoints,
  kMissingTexture,
  kNoValidPatches,
  kLabelOutOfRange,
  kInvalidProblem,
  kTooLarge,
  kPlaneNotVisible,
  kInvalidArgument,
  kParseError,
};

const char* ErrorCodeName(ErrorCode code);

// All library failures are reported through this type. The code is stable and
// meant to be switched on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace planemerge
