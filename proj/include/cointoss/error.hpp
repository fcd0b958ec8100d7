#pragma once

#include <stdexcept>
#include <string>

namespace cointoss {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed configuration or serialized input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A requested depth or enumeration size exceeds the configured budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// A numerical step of a construction could not be completed (singular
// system, ambiguous case, failed bracket, violated ordering).
class ConstructionError : public Error {
 public:
  using Error::Error;
};

// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cointoss
