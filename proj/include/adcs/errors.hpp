#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace adcs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidRotation : public Error {
 public:
  using Error::Error;
};

class NotSkew : public Error {
 public:
  using Error::Error;
};

class SingularInertia : public Error {
 public:
  using Error::Error;
};

class DegenerateDirections : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Raised when the implicit angular-velocity update fails to reach tolerance.
/// `trace` holds the residual norm after each iteration.
class NewtonNoConvergence : public Error {
 public:
  NewtonNoConvergence(const std::string& what, std::vector<double> trace)
      : Error(what), trace(std::move(trace)) {}
  std::vector<double> trace;
};

}  // namespace adcs
