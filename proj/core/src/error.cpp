#include "kinematic/error.hpp"

namespace kinematic {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kData: return "data";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kGridOrder: return "grid-order";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kDegenerateStats: return "degenerate-stats";
    case ErrorCode::kNumerical: return "numerical-failure";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kLeakage: return "leakage";
    case ErrorCode::kDependency: return "dependency";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, std::string(to_string(code)) + " error: " + message);
}

}  // namespace kinematic
