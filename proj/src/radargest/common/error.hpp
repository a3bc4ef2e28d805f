#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace radargest {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kFormat,
  kShape,
  kNumeric,
  kState,
  kInternal,
};

const char* error_code_name(ErrorCode code);

// Every failure in the core is reported as an Error. The C API maps the code
// onto rg_status and keeps the message and byte offset for the caller.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::int64_t byte_offset = -1)
      : std::runtime_error(message), code_(code), byte_offset_(byte_offset) {}

  ErrorCode code() const { return code_; }
  // First offending byte of a malformed file, or -1.
  std::int64_t byte_offset() const { return byte_offset_; }

 private:
  ErrorCode code_;
  std::int64_t byte_offset_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::kInvalidArgument, message);
}

}  // namespace radargest
