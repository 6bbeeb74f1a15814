#pragma once

#include <stdexcept>
#include <string>

namespace salt {

// Thrown when array dimensions are inconsistent with what an operation needs.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown for malformed or unusable input data (files, series, parameter values).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a numerical routine cannot continue (singular solve, divergence,
// non-finite intermediates).
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace salt
