#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace otc {

enum class ErrorCode {
  NonPositiveRate,
  MassOverflow,
  WrongFamilyField,
  MissingField,
  InvalidArgument,
  KindMismatch,
  InfeasibleDistribution,
  InfeasibleDuringIntegration,
  BracketFailure,
  NoConvergence,
  InfeasibleSolution,
  SingularMatrix,
  InconsistentInitialCounts,
  TimeGridMismatch,
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable error code. Every failure raised by
/// the library is an `otc::Error`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace otc
