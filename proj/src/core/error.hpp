#pragma once

#include <stdexcept>
#include <string>

namespace geoconcept {

// Error categories surfaced through the C API as gc_status values.
enum class ErrorCode {
  kUsage = 1,
  kShape,
  kNumeric,
  kData,
  kIo,
  kBadMagic,
  kVersionMismatch,
  kChecksumMismatch,
  kCountMismatch,
  kValidation,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kData: return "data";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kVersionMismatch: return "version_mismatch";
    case ErrorCode::kChecksumMismatch: return "checksum_mismatch";
    case ErrorCode::kCountMismatch: return "count_mismatch";
    case ErrorCode::kValidation: return "validation";
  }
  return "unknown";
}

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace geoconcept
