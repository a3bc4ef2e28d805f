#include "radargest/common/error.hpp"

namespace radargest {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kFormat: return "format_error";
    case ErrorCode::kShape: return "shape_error";
    case ErrorCode::kNumeric: return "numeric_error";
    case ErrorCode::kState: return "state_error";
    case ErrorCode::kInternal: return "internal_error";
  }
  return "internal_error";
}

}  // namespace radargest
