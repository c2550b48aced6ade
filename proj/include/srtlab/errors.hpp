#pragma once

#include <stdexcept>
#include <string>

namespace srt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters in a spec or config.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A law or scale could not be built from otherwise well-formed input.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition does not hold for the supplied object.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Parameters outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A requested point lies beyond a table or sequence horizon.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Memory budget exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Quadrature failure, cross-route disagreement or precision loss.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace srt
