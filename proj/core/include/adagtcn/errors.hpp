#pragma once

#include <stdexcept>
#include <string>

namespace adagtcn {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor shape disagreement (names both shapes in the message).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Temporal sequence shorter than an operation's receptive field.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset files, checkpoints, or session records.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, divergence, or failed numerical checks.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace adagtcn
