#pragma once

#include <stdexcept>
#include <string>

namespace cropemu {

// Base of every error raised by the library. Subclasses map onto the
// failure categories used across modules.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent or unsupported configuration (shapes, hyperparameters, flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller-supplied data violates a precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

// Non-finite value encountered during a numeric computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed file content; the message carries the line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Parsed content that breaks a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace cropemu
