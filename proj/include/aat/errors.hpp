#pragma once

#include <stdexcept>
#include <string>

namespace aat {

// Base of every error the library raises. exit_code() is the process exit
// status the CLI reports for this category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

// Malformed configuration, bad arguments, or a precondition the caller broke.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class ValidationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Tensor extents that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Data files that do not parse (IDX, checkpoints).
class FormatError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// NaN/Inf in a loss or distance.
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 5; }
};

}  // namespace aat
