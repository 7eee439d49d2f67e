#pragma once

#include <stdexcept>
#include <string>

namespace ssd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument value or range (bad schedule endpoints, bad levels, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function (e.g. SNR at t = 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Operation requested in a state where it is undefined, e.g. sampling
/// through a step whose transition covariance is not PSD.
class StateError : public Error {
 public:
  using Error::Error;
};

/// A configured size cap was exceeded (dense materialization).
class ResourceError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConstructionError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Failure inside the reverse chain; carries the timestep it happened at.
class ChainError : public Error {
 public:
  ChainError(int t, const std::string& what)
      : Error("t=" + std::to_string(t) + ": " + what), t_(t) {}
  int timestep() const { return t_; }

 private:
  int t_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace ssd
