#pragma once

#include <stdexcept>
#include <string>

namespace dirfocus {

/// Invalid argument or configuration value.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tensor or matrix dimensions that do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation that cannot be carried out on the given numbers
/// (singular matrix, empty energy band, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent data read from disk.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cross-validation constraints that no fold assignment can satisfy.
class InfeasibleSplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dirfocus
