#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sbc {

/// Stable error codes surfaced by the library and the command-line tool.
enum class ErrorCode {
  WindowTooShort,
  BadTreatedIndex,
  InvalidPanel,
  InvalidSpec,
  DimensionMismatch,
  DegenerateConstraint,
  LagOutOfRange,
  MaxIterations,
  FailureRateExceeded,
  UnbalancedPanel,
  UnknownTreatedLabel,
  UnknownPeriodLabel,
  NonContiguousPeriods,
  DuplicateCell,
  MalformedCsv,
  InvalidConfig,
  IoFailure,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::BadTreatedIndex: return "BadTreatedIndex";
    case ErrorCode::InvalidPanel: return "InvalidPanel";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateConstraint: return "DegenerateConstraint";
    case ErrorCode::LagOutOfRange: return "LagOutOfRange";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::FailureRateExceeded: return "FailureRateExceeded";
    case ErrorCode::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorCode::UnknownTreatedLabel: return "UnknownTreatedLabel";
    case ErrorCode::UnknownPeriodLabel: return "UnknownPeriodLabel";
    case ErrorCode::NonContiguousPeriods: return "NonContiguousPeriods";
    case ErrorCode::DuplicateCell: return "DuplicateCell";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sbc
