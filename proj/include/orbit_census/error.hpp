#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orbit_census {

enum class ErrorKind {
  InvalidInput,
  NotAperiodic,
  DeadState,
  Overflow,
  BudgetExceeded,
  InconsistentInput,
  MissingCylinder,
  InadmissibleWord,
  TailNotConverged,
  StateSpaceTooLarge,
  NotConverged,
  DegenerateTopModulus,
  PositivityViolated,
  NoBracket,
  DerivativeUnstable,
  LatticeSuspected,
  Overlap,
  ShadowViolation,
  ConfigError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::NotAperiodic: return "NotAperiodic";
    case ErrorKind::DeadState: return "DeadState";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::InconsistentInput: return "InconsistentInput";
    case ErrorKind::MissingCylinder: return "MissingCylinder";
    case ErrorKind::InadmissibleWord: return "InadmissibleWord";
    case ErrorKind::TailNotConverged: return "TailNotConverged";
    case ErrorKind::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::DegenerateTopModulus: return "DegenerateTopModulus";
    case ErrorKind::PositivityViolated: return "PositivityViolated";
    case ErrorKind::NoBracket: return "NoBracket";
    case ErrorKind::DerivativeUnstable: return "DerivativeUnstable";
    case ErrorKind::LatticeSuspected: return "LatticeSuspected";
    case ErrorKind::Overlap: return "Overlap";
    case ErrorKind::ShadowViolation: return "ShadowViolation";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

// Every failure in the library is reported through this type; kind() is what
// callers (and the CLI exit-code mapping) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace orbit_census
