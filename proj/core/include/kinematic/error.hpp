#pragma once

#include <stdexcept>
#include <string>

namespace kinematic {

/// Failure categories. The CLI maps each one onto a distinct exit status.
enum class ErrorCode {
  kParse,
  kData,
  kShape,
  kGridOrder,
  kInsufficientData,
  kEmptyInput,
  kOutOfRange,
  kDegenerateStats,
  kNumerical,
  kConfig,
  kLeakage,
  kDependency,
  kInternal,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace kinematic
