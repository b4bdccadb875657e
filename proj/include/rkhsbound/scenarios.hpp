#pragma once

// Reproducible problem generators.

#include <cstdint>
#include <vector>

#include "rkhsbound/gp_core.hpp"
#include "rkhsbound/types.hpp"

namespace rkhsbound {

/// f(x) = sum_c k(x, x_c) alpha_c with RKHS norm sqrt(alpha^T K_cc alpha).
struct RandomRkhsFunction {
  Kernel<double> kernel;
  PointList<double> centers;
  MatrixXd coefficients;  // n_f x M, column c is alpha_c
  double norm{0};

  VectorXd operator()(const VectorXd& x) const;
  /// Squared RKHS norm recomputed from the coefficients.
  double squared_norm() const;
};

/// Standard-normal coefficients rescaled to the requested norm.
RandomRkhsFunction random_rkhs_function(const Kernel<double>& kernel, double gamma_target,
                                        const PointList<double>& centers, std::uint64_t seed);

struct IllustrativeScenario {
  Problem<double> problem;
  std::vector<double> grid;
  Index anchor{0};  // grid index of x* = 1.5
  RandomRkhsFunction truth;
  VectorXd noise;
};

/// Two noisy samples of a scalar function under the unit-lengthscale
/// squared-exponential kernel, |w_j| <= 0.2 and gamma_f = 1.
IllustrativeScenario gen_illustrative(std::uint64_t seed);

inline constexpr double kIllustrativeAnchor = 1.5;

struct QuadrotorConfig {
  int n_data{100};
  double wind_a{0.3};  // semi-axis along the global x axis
  double wind_b{0.1};  // semi-axis along the global z axis
  double lengthscale{1.0};
  double period{6.283185307179586};
  double gamma_f{1.0};
  double gamma_target{0.9};
  int n_centers{20};
  std::uint64_t seed{0};

  void validate() const;
};

struct QuadrotorScenario {
  Problem<double> problem;
  VectorXd tilt;  // theta_j per data index
  RandomRkhsFunction truth;
  VectorXd noise;  // stacked (x, z) body-frame noise
  QuadrotorConfig config;
};

/// 2x2 quadratic form of the wind ellipsoid seen in the body frame at tilt theta.
Matrix2d wind_form(double theta, double a, double b);

/// Residual-acceleration regression with one rotated wind ellipsoid per data
/// index acting on its (x, z) measurement pair.
QuadrotorScenario gen_quadrotor(const QuadrotorConfig& config);

/// Same data under uniform point-wise bounds |w_i| <= gamma_bar.
Problem<double> pointwise_conversion(const Problem<double>& problem, double gamma_bar);

/// Point-wise variant of the quadrotor data: only the measurements of one
/// output coordinate, each bounded by the larger wind semi-axis.
Problem<double> pointwise_variant(const QuadrotorScenario& scenario, Index coordinate);

/// Stacked latent values c_i^T f(x_i).
VectorXd measured_values(const Problem<double>& problem, const RandomRkhsFunction& f);

}  // namespace rkhsbound
