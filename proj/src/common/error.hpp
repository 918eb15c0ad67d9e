#pragma once

#include <stdexcept>
#include <string>

namespace derm {

enum class ErrorCode {
  kInvalidArgument,
  kNotFound,
  kIo,
  kCorrupt,
  kBackboneMismatch,
  kLabelOrderMismatch,
  kConflict,
  kUnavailable,
  kNumerical,
  kInternal,
};

const char* to_string(ErrorCode code);

// Every failure raised by the core carries a code so the C API and the HTTP
// layer can map it without string matching.
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

}  // namespace derm
