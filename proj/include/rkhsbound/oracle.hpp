#pragma once

// Reference solvers in feature space: the finite-dimensional primal program,
// the closed-form solution of the sigma-relaxed program, and a sampler of
// strictly feasible latent functions.

#include <cstdint>
#include <optional>
#include <vector>

#include "rkhsbound/dual_bound.hpp"
#include "rkhsbound/gp_core.hpp"
#include "rkhsbound/types.hpp"

namespace rkhsbound {

/// Feature-space view of a problem for one test input. Rows of `phi` follow
/// the training inputs and then the test input.
struct FeatureModel {
  MatrixXd phi;         // n_f (N+1) x r
  MatrixXd design;      // A = Phi_{1:N}^T C: r x N, column i is Phi_i^T c_i
  MatrixXd test_block;  // Phi_{N+1}: n_f x r

  Index rank() const { return phi.cols(); }
  VectorXd objective(const VectorXd& h) const { return test_block.transpose() * h; }
};

FeatureModel build_feature_model(const Problem<double>& problem, const VectorXd& x_star,
                                 double rank_threshold = 1e-10);

/// Constraint slacks of theta: [gamma_f^2 - |theta|^2, gamma_j^2 - |y - A^T theta|^2_{P_j}].
VectorXd primal_margins(const Problem<double>& problem, const FeatureModel& fm, const VectorXd& theta);

/// Minimum-norm coefficients reproducing stacked latent values f(x_1..x_{N+1}).
VectorXd interpolant_coefficients(const FeatureModel& fm, const VectorXd& stacked_values);

struct PrimalOptions {
  double tolerance{1e-11};  // duality gap relative to |q| gamma_f
  int max_newton_steps{400};
  double rank_threshold{1e-10};
};

struct PrimalSolution {
  double value{0};          // objective at a strictly feasible theta (lower bound on the optimum)
  double dual_value{0};     // d(lambda), an upper bound on the optimum
  VectorXd theta;
  VectorXd lambda;          // [lambda_0, lambda_1..n_con]
  double kkt_residual{0};   // (dual_value - value) / (|q| gamma_f), plus any infeasibility
  int iterations{0};

  /// Equivalent noise parameters sigma_j = sqrt(lambda_0 / lambda_j).
  VectorXd sigma() const;
};

/// Solve max h^T Phi_{N+1} theta s.t. |theta|^2 <= gamma_f^2 and the noise
/// constraints, by minimizing the Lagrange dual over lambda >= 0 with a
/// log-barrier Newton method and closed-form inner maximization over theta.
PrimalSolution solve_primal(const Problem<double>& problem, const BoundQuery<double>& query,
                            const PrimalOptions& opts = {});
PrimalSolution solve_primal(const Problem<double>& problem, const FeatureModel& fm, const VectorXd& h,
                            const PrimalOptions& opts = {});

struct RelaxedSolution {
  double value{0};
  VectorXd theta_mean;     // S^-1 A P_sigma y
  VectorXd theta_star;     // worst-case coefficients
  double q_norm_sq{0};     // |q|^2_{S^-1}
  double data_fit{0};      // |y|^2_{K_hat^-1} from the feature route
  double budget{0};        // gamma_f^2 + sum_j gamma_j^2 / sigma_j^2
};

/// Feature-space closed form of the sigma-relaxed program.
RelaxedSolution relaxed_solution(const Problem<double>& problem, const FeatureModel& fm, const VectorXd& h,
                                 const VectorXd& sigma, double cap = kDefaultSigmaCap);
double relaxed_closed_form(const Problem<double>& problem, const BoundQuery<double>& query, const VectorXd& sigma,
                           double cap = kDefaultSigmaCap);

struct FeasibleSample {
  VectorXd theta;
  VectorXd noise;       // y - A^T theta
  VectorXd test_value;  // Phi_{N+1} theta, the latent value at x*
  VectorXd margins;     // see primal_margins; all strictly positive
};

struct SamplerOptions {
  int burn_in{50};
  int thinning{5};
  int rejection_budget{100000};
};

/// Hit-and-run samples from the strictly feasible coefficient set. Starts at
/// `start` when given, otherwise at a barrier point of the primal program.
std::vector<FeasibleSample> sample_feasible_function(const Problem<double>& problem, const FeatureModel& fm,
                                                     std::uint64_t seed, int count,
                                                     const std::optional<VectorXd>& start = std::nullopt,
                                                     const SamplerOptions& opts = {});

}  // namespace rkhsbound
