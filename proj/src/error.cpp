#include "otc/error.hpp"

namespace otc {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositiveRate: return "NonPositiveRate";
    case ErrorCode::MassOverflow: return "MassOverflow";
    case ErrorCode::WrongFamilyField: return "WrongFamilyField";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::InfeasibleDistribution: return "InfeasibleDistribution";
    case ErrorCode::InfeasibleDuringIntegration: return "InfeasibleDuringIntegration";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::InfeasibleSolution: return "InfeasibleSolution";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::InconsistentInitialCounts: return "InconsistentInitialCounts";
    case ErrorCode::TimeGridMismatch: return "TimeGridMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace otc
