#pragma once

#include <stdexcept>
#include <string>

namespace pmseg {

/// Invalid configuration, malformed input files or violated preconditions on
/// user-supplied data. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, diverged training. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pmseg
