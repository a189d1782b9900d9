#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace resalloc {

enum class ErrorCode {
  SchemaError,
  InvalidArgument,
  EmptyAtomList,
  ProbabilityNotNormalized,
  MissingAtoms,
  DegenerateDenominator,
  LinearStage,
  SingularMoments,
  NonpositiveCurvature,
  UnboundedAbove,
  InstanceTooLarge,
  RegimeCrossing,
  NoConvergence,
  TargetAtMean,
  SolverFailure,
};

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyAtomList: return "EmptyAtomList";
    case ErrorCode::ProbabilityNotNormalized: return "ProbabilityNotNormalized";
    case ErrorCode::MissingAtoms: return "MissingAtoms";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::LinearStage: return "LinearStage";
    case ErrorCode::SingularMoments: return "SingularMoments";
    case ErrorCode::NonpositiveCurvature: return "NonpositiveCurvature";
    case ErrorCode::UnboundedAbove: return "UnboundedAbove";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::RegimeCrossing: return "RegimeCrossing";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::TargetAtMean: return "TargetAtMean";
    case ErrorCode::SolverFailure: return "SolverFailure";
  }
  return "Unknown";
}

// All library failures are reported through this type; the code carries the
// module-level error name that the CLI and C API surface.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace resalloc
