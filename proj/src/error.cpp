#include "salsanet/class_id.hpp"
#include "salsanet/error.hpp"

namespace salsanet {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMalformedScan: return "malformed-scan";
    case ErrorCode::kCalibParse: return "calib-parse";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kDegenerateBatch: return "degenerate-batch";
    case ErrorCode::kUndefinedAngle: return "undefined-angle";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kCorruptData: return "corrupt-data";
  }
  return "unknown";
}

const char* class_name(ClassId c) noexcept {
  switch (c) {
    case ClassId::kBackground: return "background";
    case ClassId::kRoad: return "road";
    case ClassId::kVehicle: return "vehicle";
  }
  return "unknown";
}

}  // namespace salsanet
