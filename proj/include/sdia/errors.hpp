#pragma once

#include <stdexcept>
#include <string>

namespace sdia {

// Rejected user input: bad flags, malformed case files, out-of-range
// parameters. Raised before any heavy computation starts.
class validation_error : public std::invalid_argument {
 public:
  explicit validation_error(const std::string& what)
      : std::invalid_argument(what) {}
};

// Numerical failure mid-computation: non-PD argument to a log-det,
// corrupted covariance, degenerate normalizer.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace sdia
