#pragma once

#include <stdexcept>
#include <string>

namespace strucgrad {

// Failure families map 1:1 onto the exit codes exposed through the C API:
// ConfigError -> 2 (usage/config), NumericError -> 3 (numeric abort).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or layout mismatch between tensors, parameter vectors or datasets.
struct ShapeError : Error {
  using Error::Error;
};

// Bad configuration, malformed input file, unusable CLI request.
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite values, diverging series, aborted optimization.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace strucgrad
