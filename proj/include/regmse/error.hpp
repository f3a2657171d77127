#pragma once

#include <stdexcept>
#include <string>

namespace regmse {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  ok = 0,
  input_error = 2,
  numerical_fallback = 3,
  nonconvergence = 4,
};

/// Malformed or inconsistent input data (schema, CSV, configuration).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sampled category set does not cover all outcome categories.
class SeparationError : public InputError {
 public:
  using InputError::InputError;
};

/// A coefficient of variation was requested for a zero or negative total.
class UndefinedCv : public std::domain_error {
 public:
  UndefinedCv() : std::domain_error("CV undefined on empty/null total") {}
};

}  // namespace regmse
