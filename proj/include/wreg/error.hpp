#pragma once

#include <stdexcept>
#include <string>

namespace wreg {

// Error taxonomy. The CLI maps each category onto a distinct exit code.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wreg
