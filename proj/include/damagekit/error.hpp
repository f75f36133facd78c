#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace damagekit {

enum class ErrorKind {
  InvalidPolygon,
  CorruptRle,
  DimensionMismatch,
  Parse,
  UnsupportedShape,
  UnknownClass,
  InvalidRegion,
  OutOfRange,
  Convergence,
  InvalidPlan,
  Configuration,
  Io,
  Usage,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the toolkit; the kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised when the Poisson solver runs out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, double final_residual, int iterations)
      : Error(ErrorKind::Convergence, message),
        final_residual_(final_residual),
        iterations_(iterations) {}

  double final_residual() const noexcept { return final_residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double final_residual_;
  int iterations_;
};

}  // namespace damagekit
