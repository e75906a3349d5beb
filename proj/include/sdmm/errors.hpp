#pragma once

#include <stdexcept>
#include <string>

namespace sdmm {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivisionByZero : public Error {
 public:
  DivisionByZero() : Error("division by zero in prime field") {}
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Raised by linear solvers when the system does not pin down a unique answer.
class Underdetermined : public Error {
 public:
  using Error::Error;
};

class Inconsistent : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

// The collector ran out of results before any decodable configuration formed.
class InsufficientWorkers : public Error {
 public:
  using Error::Error;
};

class WireError : public Error {
 public:
  using Error::Error;
};

}  // namespace sdmm
