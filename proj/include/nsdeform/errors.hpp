#pragma once

#include <stdexcept>
#include <string>

namespace nsdeform {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A location lies outside the domain, or a geometric precondition fails.
class DomainError : public Error {
public:
  using Error::Error;
};

/// A model or algorithm parameter is out of its valid range.
class ParameterError : public Error {
public:
  using Error::Error;
};

/// Factorization failure, non-convergence, degenerate input curves.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// File could not be read, parsed or written.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace nsdeform
