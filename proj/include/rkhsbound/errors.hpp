#pragma once

#include <stdexcept>
#include <string>

namespace rkhsbound {

// The data falsify the noise and RKHS-norm assumptions jointly (negative
// radicand in the scaling factor, or an empty primal feasible set).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative solver ran out of its iteration budget.
class NonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A matrix that should be symmetric PSD/PD is not (beyond tolerance), or is
// numerically singular.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when the posterior covariance cannot be inverted for the ellipsoidal
// bound.
class SingularCovarianceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace rkhsbound
