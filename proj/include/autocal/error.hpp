#pragma once

#include <stdexcept>
#include <string>

namespace autocal {

enum class ErrorCode {
  io_failure,
  bad_schema,
  parse_failure,
  invalid_argument,
  gimbal_lock,
  degenerate_geometry,
  no_pose_available,
  insufficient_overlap,
  insufficient_consistent_passes,
  track_too_short,
  numerical_failure,
  empty_input,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::io_failure: return "io_failure";
    case ErrorCode::bad_schema: return "bad_schema";
    case ErrorCode::parse_failure: return "parse_failure";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::gimbal_lock: return "gimbal_lock";
    case ErrorCode::degenerate_geometry: return "degenerate_geometry";
    case ErrorCode::no_pose_available: return "no_pose_available";
    case ErrorCode::insufficient_overlap: return "insufficient_overlap";
    case ErrorCode::insufficient_consistent_passes: return "insufficient_consistent_passes";
    case ErrorCode::track_too_short: return "track_too_short";
    case ErrorCode::numerical_failure: return "numerical_failure";
    case ErrorCode::empty_input: return "empty_input";
  }
  return "unknown";
}

/// Exception thrown by all pipeline stages. Carries a machine-checkable
/// code so callers can branch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace autocal
