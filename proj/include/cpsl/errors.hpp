#pragma once

#include <stdexcept>
#include <string>

namespace cpsl {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed configuration: missing field, wrong type, unknown enum value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Tensor dimensions that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain of an operation (cut index, subcarrier count).
class DomainError : public Error {
 public:
  using Error::Error;
};

// No feasible decision exists (e.g. more devices than subcarriers).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// An exhaustive oracle refused to run because the search space is too large.
class GuardError : public Error {
 public:
  using Error::Error;
};

}  // namespace cpsl
