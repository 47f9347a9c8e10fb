#pragma once

#include <stdexcept>
#include <string>

namespace ftol {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents disagree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared where finite values are required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File content does not follow the expected container layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

// File ends before the declared payload.
class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

// A class label outside the valid range.
class LabelRangeError : public Error {
 public:
  using Error::Error;
};

// Class statistics cannot be formed (e.g. a class has no examples).
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ftol
