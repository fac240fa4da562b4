#include "skelfont/error.hpp"
#include "skelfont/tensor.hpp"

namespace skelfont {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kMissingFile: return "MISSING_FILE";
    case ErrorCode::kUnsupportedFormat: return "UNSUPPORTED_FORMAT";
    case ErrorCode::kIoError: return "IO_ERROR";
    case ErrorCode::kChannelMismatch: return "CHANNEL_MISMATCH";
    case ErrorCode::kShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::kBadSpatialSize: return "BAD_SPATIAL_SIZE";
    case ErrorCode::kNonFiniteLoss: return "NON_FINITE_LOSS";
    case ErrorCode::kEmptyStyle: return "EMPTY_STYLE";
    case ErrorCode::kDuplicateCharId: return "DUPLICATE_CHAR_ID";
    case ErrorCode::kExhaustedSplit: return "EXHAUSTED_SPLIT";
    case ErrorCode::kConfigError: return "CONFIG_ERROR";
    case ErrorCode::kConfigNotFound: return "CONFIG_NOT_FOUND";
    case ErrorCode::kManifestMismatch: return "MANIFEST_MISMATCH";
    case ErrorCode::kInsufficientClasses: return "INSUFFICIENT_CLASSES";
    case ErrorCode::kUnknownLabel: return "UNKNOWN_LABEL";
    case ErrorCode::kEmptyInput: return "EMPTY_INPUT";
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
  }
  return "UNKNOWN";
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

}  // namespace skelfont
