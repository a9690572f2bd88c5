#pragma once

#include <stdexcept>
#include <string>

namespace hsva {

/// Base of every error thrown by the library. Messages always name the
/// offending field, file, parameter or tensor dimension.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes disagree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered, or a value outside an operation's domain.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Dataset container is missing, malformed or violates a split invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hsva
