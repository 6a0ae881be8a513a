#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace corrloc {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on the inputs of an operation does not hold.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A requested object would not fit the configured size limits.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// The circulant embedding of a covariance has a negative spectral entry.
class EmbeddingInvalid : public Error {
 public:
  EmbeddingInvalid(const std::string& what, double min_entry, double max_entry)
      : Error(what), min_entry(min_entry), max_entry(max_entry) {}
  double min_entry;
  double max_entry;
};

/// An iterative method stopped before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> residuals = {})
      : Error(what), residuals(std::move(residuals)) {}
  std::vector<double> residuals;
};

/// Adaptive quadrature could not certify its error estimate.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double error_estimate)
      : Error(what), error_estimate(error_estimate) {}
  double error_estimate;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A run directory was written by an incompatible schema version.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace corrloc
