#include "strateff/error.hpp"

namespace strateff {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::EmptyArm: return "EmptyArm";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::BandwidthError: return "BandwidthError";
    case ErrorCode::SeparationError: return "SeparationError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::OverlapViolation: return "OverlapViolation";
    case ErrorCode::MissingInstrument: return "MissingInstrument";
    case ErrorCode::WeakFirstStage: return "WeakFirstStage";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::InvalidShares: return "InvalidShares";
    case ErrorCode::InvalidNoise: return "InvalidNoise";
    case ErrorCode::RejectionBudgetExceeded: return "RejectionBudgetExceeded";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::AllReplicationsFailed: return "AllReplicationsFailed";
    case ErrorCode::IoError: return "IoError";
  }
  return "Error";
}

bool Error::is_validation() const noexcept {
  switch (code_) {
    case ErrorCode::FileNotFound:
    case ErrorCode::SchemaMismatch:
    case ErrorCode::InvalidValue:
    case ErrorCode::EmptyArm:
    case ErrorCode::DomainError:
    case ErrorCode::BandwidthError:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::MissingInstrument:
    case ErrorCode::InvalidShares:
    case ErrorCode::InvalidNoise:
    case ErrorCode::ConfigError:
      return true;
    default:
      return false;
  }
}

}  // namespace strateff
