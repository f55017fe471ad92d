#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vgne {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A vector or matrix did not have the size the operation requires.
class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, std::ptrdiff_t expected, std::ptrdiff_t received)
      : Error(what + ": expected length " + std::to_string(expected) + ", received " +
              std::to_string(received)),
        expected_(expected),
        received_(received) {}

  explicit DimensionError(const std::string& what) : Error(what) {}

  std::ptrdiff_t expected() const noexcept { return expected_; }
  std::ptrdiff_t received() const noexcept { return received_; }

 private:
  std::ptrdiff_t expected_ = -1;
  std::ptrdiff_t received_ = -1;
};

/// A parameter is outside the domain of the operation (nonpositive step, bad bound, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A function value or iterate contains NaN or infinity.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// An iteration produced a non-finite iterate.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}

  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

/// An inner numerical procedure (power iteration, enumeration, ...) failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Input file could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input file carries an unsupported `spec_version`.
class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace vgne
