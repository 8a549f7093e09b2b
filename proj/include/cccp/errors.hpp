#pragma once

#include <stdexcept>
#include <string>

namespace cccp {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct NotSymmetric : Error {
  using Error::Error;
};

struct NotPSD : Error {
  using Error::Error;
};

/// The real/imaginary-independence assumption (real Gamma and C) is violated.
struct IndependenceViolated : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct SingularMatrix : Error {
  using Error::Error;
};

/// Joint bound compilation requires Re(z) >= 0, Im(z) >= 0.
struct MissingOrthant : Error {
  using Error::Error;
};

/// Joint Monte-Carlo validation supports independent rows (theta = 1) only.
struct UnsupportedDependence : Error {
  using Error::Error;
};

struct EmptyGrid : Error {
  using Error::Error;
};

struct NumericalError : Error {
  using Error::Error;
};

/// Input-file validation failure; `path` points at the offending field.
struct SchemaError : Error {
  SchemaError(const std::string& field_path, const std::string& what_arg)
      : Error(field_path + ": " + what_arg), path(field_path) {}
  std::string path;
};

}  // namespace cccp
