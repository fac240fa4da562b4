#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace skelfont {

enum class ErrorCode {
  kInvalidArgument,
  kMissingFile,
  kUnsupportedFormat,
  kIoError,
  kChannelMismatch,
  kShapeMismatch,
  kBadSpatialSize,
  kNonFiniteLoss,
  kEmptyStyle,
  kDuplicateCharId,
  kExhaustedSplit,
  kConfigError,
  kConfigNotFound,
  kManifestMismatch,
  kInsufficientClasses,
  kUnknownLabel,
  kEmptyInput,
  kDimensionMismatch,
};

// Machine-parsable name, e.g. "CONFIG_NOT_FOUND".
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace skelfont
