#pragma once

#include <stdexcept>
#include <string>

namespace bumphunt {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments (maps to CLI exit code 1).
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Malformed or degenerate input data (maps to CLI exit code 2).
class DataError : public Error {
public:
  using Error::Error;
};

/// Numerical failure: non-convergence, loss of definiteness (exit code 3).
class NumericalError : public Error {
public:
  using Error::Error;
};

class ConvergenceError : public NumericalError {
public:
  ConvergenceError(const std::string& what, int iterations)
      : NumericalError(what + " (after " + std::to_string(iterations) + " sweeps)"),
        iterations_(iterations) {}

  int iterations() const noexcept { return iterations_; }

private:
  int iterations_;
};

class NotPositiveSemidefiniteError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

}  // namespace bumphunt
