#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sagpr {

enum class ErrorCode {
  MalformedRow,
  MissingColumn,
  NonMonotoneDepth,
  NonMonotoneAges,
  NonPositiveSigma,
  InvalidArgument,
  DomainError,
  SingularSystem,
  OptimFailed,
  EmptyNeighborhood,
  DegenerateWeights,
  IoError,
  ConfigError,
  NoStack,
  NoSignals,
};

std::string_view error_code_name(ErrorCode code);

// Numeric failures map to exit status 3, everything else to 2.
bool is_numeric_failure(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sagpr
