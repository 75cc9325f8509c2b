#pragma once

#include <stdexcept>
#include <string>

namespace gepc {

enum class ErrorCode {
  kShapeMismatch,
  kBadMagic,
  kTruncatedPayload,
  kDimensionOverflow,
  kNonSquareRotation,
  kOutOfRange,
  kInvalidArgument,
  kInsufficientData,
  kSingularCovariance,
  kLookupMiss,
  kIo,
  kConfig,
  kDegenerate,
  kBridge,
};

const char* to_string(ErrorCode code);

// Library-wide exception. The code lets callers (the CLI in particular)
// map failures onto exit classes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gepc
