#pragma once

#include <stdexcept>
#include <string>

namespace wsvc {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller violated an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Shape rule violations; the message names the op kind and both shapes.
class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

// A forward op produced NaN/Inf, or a loss went non-finite during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid model/codec configuration detected at build time.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or corrupted bitstream.
class DecodeError : public Error {
 public:
  using Error::Error;
};

// File system / file format trouble.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace wsvc
