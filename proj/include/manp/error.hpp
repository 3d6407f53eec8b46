#pragma once

#include <stdexcept>
#include <string>

namespace manp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a documented precondition (bad grid, non-positive
/// permittivity, incompatible right-hand side, unknown config key, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A computed state violates an invariant the scheme guarantees in exact
/// arithmetic (e.g. a negative concentration after a backward-Euler solve).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace manp
