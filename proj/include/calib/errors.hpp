#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace calib {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid numeric input: non-finite logits, non-positive temperature,
/// zero probabilities where a divergence would be infinite, and the like.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or run configuration (bad alpha, unknown keys, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// API contract violation: empty sets, mismatched lengths, shape errors.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number of the offending row.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& message)
      : Error(file + ":" + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace calib
