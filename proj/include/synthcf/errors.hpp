#pragma once

#include <stdexcept>
#include <string>

namespace synthcf {

// Input/config problems: bad files, inconsistent windows, missing units.
// The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures: non-convergence, singular systems, non-finite
// likelihoods.  The CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace synthcf
