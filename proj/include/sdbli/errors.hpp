#pragma once

#include <stdexcept>
#include <string>

namespace sdbli {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operands live on different grids / partitions, or serialized payloads
// disagree with their declared shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Referenced input file or dataset is absent.
class MissingInputError : public Error {
 public:
  using Error::Error;
};

// An iterative solve exhausted its budget; carries the last residual so
// callers can report how close it got.
class SolveError : public Error {
 public:
  SolveError(const std::string& what, double last_residual, long iterations)
      : Error(what), last_residual(last_residual), iterations(iterations) {}
  double last_residual;
  long iterations;
};

// Training data unusable (empty, shape-mismatched, or fully degenerate).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// An API contract was violated by the caller (for instance requesting a
// strict schedule without supplying every residual).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace sdbli
