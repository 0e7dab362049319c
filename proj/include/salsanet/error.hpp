#pragma once

#include <stdexcept>
#include <string>

namespace salsanet {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo,
  kMalformedScan,
  kCalibParse,
  kShape,
  kDegenerateBatch,
  kUndefinedAngle,
  kLengthMismatch,
  kConfig,
  kEmptyInput,
  kNonFinite,
  kCorruptData,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace salsanet
