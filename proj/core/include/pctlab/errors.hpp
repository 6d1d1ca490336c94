#pragma once

#include <stdexcept>
#include <string>

namespace pctlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments, malformed configs, or contract violations by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown: non-finite loss, failed factorization, etc.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Corrupted or mismatched artifacts on disk.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace pctlab
