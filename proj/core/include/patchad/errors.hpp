#pragma once

#include <stdexcept>
#include <string>

namespace patchad {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that cannot be combined.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Axis index outside [0, rank).
class AxisError : public Error {
 public:
  using Error::Error;
};

// Violated precondition on an operation's arguments.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid model / training / CLI configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data that does not satisfy an operation's requirements.
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; the message carries row/column context.
class ParseError : public InputError {
 public:
  using InputError::InputError;
};

// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Non-finite values encountered during optimisation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures; the message names the path.
class IoError : public Error {
 public:
  using Error::Error;
};

// Corrupt or truncated checkpoint; the message names the failing section.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Checkpoint written for a different model configuration.
class ConfigMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace patchad
