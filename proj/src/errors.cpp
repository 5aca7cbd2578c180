#include "sagpr/errors.hpp"

namespace sagpr {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow: return "E_MALFORMED_ROW";
    case ErrorCode::MissingColumn: return "E_MISSING_COLUMN";
    case ErrorCode::NonMonotoneDepth: return "E_NON_MONOTONE_DEPTH";
    case ErrorCode::NonMonotoneAges: return "E_NON_MONOTONE_AGES";
    case ErrorCode::NonPositiveSigma: return "E_NON_POSITIVE_SIGMA";
    case ErrorCode::InvalidArgument: return "E_INVALID_ARGUMENT";
    case ErrorCode::DomainError: return "E_DOMAIN";
    case ErrorCode::SingularSystem: return "E_SINGULAR_SYSTEM";
    case ErrorCode::OptimFailed: return "E_OPTIM_FAILED";
    case ErrorCode::EmptyNeighborhood: return "E_EMPTY_NEIGHBORHOOD";
    case ErrorCode::DegenerateWeights: return "E_DEGENERATE_WEIGHTS";
    case ErrorCode::IoError: return "E_IO";
    case ErrorCode::ConfigError: return "E_CONFIG";
    case ErrorCode::NoStack: return "E_NO_STACK";
    case ErrorCode::NoSignals: return "E_NO_SIGNALS";
  }
  return "E_UNKNOWN";
}

bool is_numeric_failure(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularSystem:
    case ErrorCode::OptimFailed:
    case ErrorCode::EmptyNeighborhood:
    case ErrorCode::DegenerateWeights:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

}  // namespace sagpr
