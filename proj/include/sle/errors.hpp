#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sle {

enum class ErrorKind {
  invalid_argument,
  rejected_kappa,
  insufficient_resolution,
  solver_stall,
  trace_unresolved,
  normalization_violation,
  out_of_range,
  reparametrization_error,
  horizon_exceeded,
  nan_detected,
  martingale_blowup,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a machine-readable kind so the
// CLI can map it onto exit codes and JSON error reports.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::rejected_kappa: return "rejected-kappa";
    case ErrorKind::insufficient_resolution: return "insufficient-resolution";
    case ErrorKind::solver_stall: return "solver-stall";
    case ErrorKind::trace_unresolved: return "trace-unresolved";
    case ErrorKind::normalization_violation: return "normalization-violation";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::reparametrization_error: return "reparametrization-error";
    case ErrorKind::horizon_exceeded: return "horizon-exceeded";
    case ErrorKind::nan_detected: return "nan-detected";
    case ErrorKind::martingale_blowup: return "martingale-blowup";
  }
  return "unknown";
}

}  // namespace sle
