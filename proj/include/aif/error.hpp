#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aif {

enum class ErrorCode {
  kAllZero,
  kNegativeWeight,
  kLengthMismatch,
  kNonFiniteScore,
  kActionOutOfRange,
  kObservationOutOfRange,
  kImpossibleObservation,
  kBudgetExceeded,
  kModeMismatch,
  kInvalidModel,
  kGridEmpty,
  kInvalidConfig,
  kUnknownVariable,
  kParseError,
  kUnknownKey,
  kConfigError,
  kUnknownSession,
  kWrongPhase,
  kGone,
  kCapacity,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAllZero: return "AllZero";
    case ErrorCode::kNegativeWeight: return "NegativeWeight";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kNonFiniteScore: return "NonFiniteScore";
    case ErrorCode::kActionOutOfRange: return "ActionOutOfRange";
    case ErrorCode::kObservationOutOfRange: return "ObservationOutOfRange";
    case ErrorCode::kImpossibleObservation: return "ImpossibleObservation";
    case ErrorCode::kBudgetExceeded: return "BudgetExceeded";
    case ErrorCode::kModeMismatch: return "ModeMismatch";
    case ErrorCode::kInvalidModel: return "InvalidModel";
    case ErrorCode::kGridEmpty: return "GridEmpty";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kUnknownVariable: return "UnknownVariable";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kUnknownKey: return "UnknownKey";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kUnknownSession: return "UnknownSession";
    case ErrorCode::kWrongPhase: return "WrongPhase";
    case ErrorCode::kGone: return "Gone";
    case ErrorCode::kCapacity: return "Capacity";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aif
