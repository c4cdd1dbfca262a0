#pragma once

#include <stdexcept>
#include <string>

namespace hdgm {

// Invalid or inconsistent user input (bad coordinates, schema mismatches,
// malformed files). Maps to CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure (non-positive-definite covariance, singular design).
// Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hdgm
