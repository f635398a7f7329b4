#pragma once

#include <stdexcept>
#include <string>

namespace flicker {

/// Malformed or unusable input data (files, columns, shapes).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure (divergence, no root found, exhausted retries).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace flicker
