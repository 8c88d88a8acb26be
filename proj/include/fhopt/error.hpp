#pragma once

#include <stdexcept>
#include <string>

namespace fhopt {

enum class ErrorCode {
  InvalidArgument,
  Infeasible,
  OverheadExhausted,
  ThetaTooSmall,
  DomainError,
  InsufficientTrials,
  ConfigError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::OverheadExhausted: return "overhead_exhausted";
    case ErrorCode::ThetaTooSmall: return "theta_too_small";
    case ErrorCode::DomainError: return "domain_error";
    case ErrorCode::InsufficientTrials: return "insufficient_trials";
    case ErrorCode::ConfigError: return "config_error";
  }
  return "unknown";
}

// Every failure raised by the library carries one of the codes above so the
// CLI can map it onto an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fhopt
