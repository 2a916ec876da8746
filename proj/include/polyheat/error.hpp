#pragma once

#include <stdexcept>
#include <string>

namespace polyheat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the admissible range of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The request is well formed but outside what the library implements.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_error_estimate)
      : Error(what), last_error_(last_error_estimate) {}
  double last_error_estimate() const { return last_error_; }

 private:
  double last_error_;
};

/// Not enough data (tail extrema, branch points, ...) to compute a diagnostic.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// File access or parse failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// An artifact was written by an incompatible schema version.
class SchemaError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace polyheat
