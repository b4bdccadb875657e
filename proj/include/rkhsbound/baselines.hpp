#pragma once

// Deterministic bounds from the literature for uniform point-wise noise
// |w_i| <= gamma_bar: the 1-norm dual with alternating minimization, the
// fixed-sigma closed forms, and the interpolation/noise split bound.

#include <vector>

#include "rkhsbound/dual_bound.hpp"
#include "rkhsbound/gp_core.hpp"
#include "rkhsbound/types.hpp"

namespace rkhsbound {

/// Common bound gamma_bar of a point-wise model with equal radii.
double uniform_noise_bound(const Problem<double>& problem);

/// y^T nu + gamma_bar |nu|_1 + lambda gamma_f^2
///   + (h^T K_** h + |nu|^2_G - 2 h^T B nu) / (4 lambda).
double scharnhorst_dual_value(const Problem<double>& problem, const BoundQuery<double>& query, const VectorXd& nu,
                              double lambda);

struct AlternatingOptions {
  double tolerance{1e-8};       // relative objective decrease per outer step
  int max_iterations{500};
  int inner_iterations{2000};
  double inner_tolerance{1e-10};
  // Stop as soon as the objective is at or below this value.
  double target_value{-1e300};
};

struct AlternatingResult {
  double value{0};
  VectorXd nu;
  double lambda{0};
  std::vector<double> trace;  // objective after each outer iteration
  int iterations{0};
  bool converged{false};
};

/// Alternate the closed-form lambda step with a proximal-gradient nu step.
AlternatingResult scharnhorst_alternating(const Problem<double>& problem, const BoundQuery<double>& query,
                                          const AlternatingOptions& opts = {});

struct Envelope {
  double center{0};
  double radius{0};
  double lower() const { return center - radius; }
  double upper() const { return center + radius; }
};

enum class FixedSigmaVariant { Hashimoto, Yang };

/// |h^T f(x*) - h^T mu| <= beta sqrt(h^T Sigma h) at sigma = sigma_bar 1 with
/// sigma_bar^2 = gamma_bar^2 (Hashimoto) or N gamma_bar^2 (Yang).
Envelope fixed_sigma_bound(const Problem<double>& problem, const VectorXd& x_star, const VectorXd& h,
                           FixedSigmaVariant variant);
double fixed_sigma_level(const Problem<double>& problem, FixedSigmaVariant variant);

struct BoxQpResult {
  VectorXd w;
  double value{0};
  double stationarity{0};
  int iterations{0};
};

/// min_{|w_i| <= bound} (y - w)^T R (y - w) by projected gradient with
/// Barzilai-Borwein steps.
BoxQpResult solve_box_qp(const MatrixXd& r, const VectorXd& y, double bound, double tolerance = 1e-8,
                         int max_iterations = 100000);

/// beta_max sqrt(h^T Sigma h) + gamma_bar |K_hat^-1 B^T h|_1 around h^T mu,
/// with beta_max^2 = gamma_f^2 - min_{|w| <= gamma_bar} |y - w|^2_{K_hat^-1}.
Envelope reed_bound(const Problem<double>& problem, const VectorXd& x_star, const VectorXd& h, double sigma_bar);

}  // namespace rkhsbound
