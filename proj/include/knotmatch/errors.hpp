#pragma once

#include <stdexcept>
#include <string>

namespace knotmatch {

// Caller passed arguments that make no sense (bad flag, wrong model kind).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data is malformed or inconsistent (bad board file, missing labels).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown: degenerate particle population, non-finite objective.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace knotmatch
