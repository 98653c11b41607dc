#pragma once

#include <stdexcept>
#include <string>

namespace kawasaki {

/// Malformed or inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical guard tripped: CFL violation, out-of-range density,
/// non-bracketing root find, solver breakdown (CLI exit code 4).
class NumericalGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A problem exceeds the sizes that exact enumeration can handle.
class SizeGuardError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace kawasaki
