#pragma once

#include <stdexcept>
#include <string>

namespace lmrmt {

/// Invalid arguments or configuration (maps to CLI exit code 2).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (maps to CLI exit code 1).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonHermitianError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Iterative solver ran out of budget; carries the best residual it reached.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double achieved)
      : NumericalError(what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

class QuadratureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Spike indices whose population eigenvalue is not separated from the rest.
class DegenerateGapError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Root bracketing failed for the spike equation.
class BracketError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace lmrmt
