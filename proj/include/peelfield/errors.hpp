#pragma once

#include <stdexcept>
#include <string>

namespace peelfield {

// Invalid input data or configuration: malformed files, inconsistent meshes,
// out-of-range parameters.  Maps to process exit code 2 in the CLI.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A numerical procedure failed on valid input: solver non-convergence,
// factorization breakdown, rank deficiency.  Maps to exit code 3 in the CLI.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace peelfield
