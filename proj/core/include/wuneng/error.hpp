#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wuneng {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class CheckpointErrorKind {
  kIo,
  kBadMagic,
  kVersionMismatch,
  kShapeMismatch,
  kTruncated,
};

class CheckpointError : public Error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what)
      : Error(what), kind_(kind) {}
  CheckpointErrorKind kind() const noexcept { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

/// Training diverged; carries the last step whose loss was finite.
class NumericAbort : public NumericError {
 public:
  NumericAbort(const std::string& what, long last_good_step)
      : NumericError(what), last_good_step_(last_good_step) {}
  long last_good_step() const noexcept { return last_good_step_; }

 private:
  long last_good_step_;
};

}  // namespace wuneng
