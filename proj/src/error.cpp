#include "gepc/error.hpp"

#include "gepc/tensor.hpp"

namespace gepc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kTruncatedPayload: return "truncated-payload";
    case ErrorCode::kDimensionOverflow: return "dimension-overflow";
    case ErrorCode::kNonSquareRotation: return "non-square-rotation";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kSingularCovariance: return "singular-covariance";
    case ErrorCode::kLookupMiss: return "lookup-miss";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kBridge: return "bridge";
  }
  return "unknown";
}

std::string to_string(const Shape& shape) {
  return std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" +
         std::to_string(shape.width);
}

}  // namespace gepc
