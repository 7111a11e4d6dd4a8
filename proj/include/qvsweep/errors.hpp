#pragma once

#include <stdexcept>
#include <string>

namespace qvs {

// Invalid problem data or configuration; raised during setup/validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure inside a solver (non-convergence, blow-up).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qvs
