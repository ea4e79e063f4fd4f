#ifndef STRATEFF_ERROR_HPP
#define STRATEFF_ERROR_HPP

#include <stdexcept>
#include <string>

namespace strateff {

enum class ErrorCode {
  FileNotFound,
  SchemaMismatch,
  InvalidValue,
  EmptyArm,
  DomainError,
  BandwidthError,
  SeparationError,
  DimensionMismatch,
  OverlapViolation,
  MissingInstrument,
  WeakFirstStage,
  SingularJacobian,
  InvalidShares,
  InvalidNoise,
  RejectionBudgetExceeded,
  QuadratureFailure,
  ConfigError,
  AllReplicationsFailed,
  IoError,
};

const char* error_code_name(ErrorCode code);

// Library errors carry a code so callers can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Input/usage problems vs failures arising during estimation itself.
  // The CLI maps these to exit codes 1 and 2.
  bool is_validation() const noexcept;

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace strateff

#endif
