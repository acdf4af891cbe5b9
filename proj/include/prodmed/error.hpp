#pragma once

#include <stdexcept>
#include <string>

namespace prodmed {

/// Invalid geometric input: dimension mismatch, non-SPD matrix, wrong factor kind.
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure: singular Jacobian, non-invertible base matrix, degenerate sample.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user input (data files, config files, option values).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace prodmed
