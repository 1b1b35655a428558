#pragma once

#include <stdexcept>
#include <string>

namespace eprlock {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input or a value violating a type invariant (bad config, bad CSV).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Physically meaningless request, e.g. a steady state above threshold.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (singular system, non-finite result).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace eprlock
