#pragma once

#include <stdexcept>
#include <string>

namespace cizsl {

/// Bad input: wrong shapes, invalid config values, malformed datasets.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A computation produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem or (de)serialization failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cizsl
