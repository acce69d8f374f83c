#pragma once

#include <stdexcept>
#include <string>

namespace zoomrds {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Index outside the declared evaluation horizon of a contraction family.
class HorizonError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of a construction does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Candidate grid too coarse for the requested scale.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace zoomrds
