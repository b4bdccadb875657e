#pragma once

// Multi-output GP posterior under the surrogate noise covariance, and the
// scaling factor beta_sigma.

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>

#include "rkhsbound/errors.hpp"
#include "rkhsbound/kernels.hpp"
#include "rkhsbound/noise_model.hpp"
#include "rkhsbound/types.hpp"

namespace rkhsbound {

/// Regression data y_i = c_i^T f(x_i) + w_i with the noise and RKHS-norm
/// assumptions attached.
template <typename Scalar>
struct Problem {
  PointList<Scalar> inputs;   // x_1..x_N
  Mat<Scalar> measurements;   // n_f x N, column i is c_i
  Vec<Scalar> y;              // N
  Kernel<Scalar> kernel;
  NoiseModel<Scalar> noise;
  Scalar gamma_f{1};

  Index size() const { return static_cast<Index>(inputs.size()); }
  Index output_dim() const { return kernel.output_dim(); }

  void validate() const {
    const Index n = size();
    if (measurements.cols() != n || y.size() != n) {
      throw std::invalid_argument("problem: inputs, measurements and y must have equal length");
    }
    if (measurements.rows() != kernel.output_dim()) {
      throw std::invalid_argument("problem: measurement vectors must have length n_f");
    }
    if (noise.size() != n) throw std::invalid_argument("problem: noise model size differs from N");
    if (!(gamma_f > Scalar{0})) throw std::invalid_argument("problem: gamma_f must be positive");
    for (const auto& x : inputs) {
      if (x.size() != kernel.input_dim()) throw std::invalid_argument("problem: input dimension mismatch");
    }
  }
};

template <typename Scalar>
Mat<Scalar> projected_gram(const Problem<Scalar>& p) {
  return projected_gram(p.kernel, p.inputs, p.measurements);
}

template <typename Scalar>
struct Posterior {
  Vec<Scalar> mean;        // n_f
  Mat<Scalar> covariance;  // n_f x n_f
};

/// Factorization of K_hat_sigma = G + K^w_sigma for one noise parameter vector.
///
/// With P_sigma = L L^T the inverse is applied as
///   K_hat^-1 = L (I + L^T G L)^-1 L^T,
/// which never inverts P_sigma and stays well defined when components of
/// sigma sit at the cap (their columns of L are dropped).
template <typename Scalar>
class PosteriorFactorization {
 public:
  PosteriorFactorization() = default;

  PosteriorFactorization(const Problem<Scalar>& problem, const Mat<Scalar>& gram, const Vec<Scalar>& sigma,
                         Scalar cap = Scalar{kDefaultSigmaCap})
      : sigma_(sigma), cap_(cap) {
    const auto& noise = problem.noise;
    const Index n = problem.size();
    if (sigma.size() != noise.num_constraints()) throw std::invalid_argument("sigma has wrong length");
    if (gram.rows() != n || gram.cols() != n) throw std::invalid_argument("gram has wrong size");
    weights_ = noise_weights(sigma, cap);
    budget_ = problem.gamma_f * problem.gamma_f;
    for (Index j = 0; j < sigma.size(); ++j) {
      budget_ += weights_(j) * noise.constraint(j).gamma * noise.constraint(j).gamma;
    }
    y_ = problem.y;
    build_factor(noise, n);
    if (n == 0) {
      alpha_.resize(0);
      data_fit_ = Scalar{0};
      return;
    }
    Mat<Scalar> m = factor_.transpose() * gram * factor_;
    m = Scalar{0.5} * (m + m.transpose()).eval();
    m.diagonal().array() += Scalar{1};
    llt_.compute(m);
    if (llt_.info() != Eigen::Success) {
      throw NumericalError("Gram matrix K_hat is indefinite (invalid kernel or noise model)");
    }
    const Vec<Scalar> z = llt_.matrixL().solve(factor_.transpose() * y_);
    data_fit_ = z.squaredNorm();
    alpha_ = solve(y_);
  }

  Index size() const { return y_.size(); }
  const Vec<Scalar>& sigma() const { return sigma_; }
  Scalar cap() const { return cap_; }
  /// sigma_j^-2, zero for capped components.
  const Vec<Scalar>& weights() const { return weights_; }
  bool capped(Index j) const { return weights_(j) == Scalar{0}; }

  /// K_hat^-1 y.
  const Vec<Scalar>& alpha() const { return alpha_; }
  /// ||y||^2 in the K_hat^-1 norm.
  Scalar data_fit() const { return data_fit_; }
  /// gamma_f^2 + sum_j gamma_j^2 / sigma_j^2.
  Scalar budget() const { return budget_; }
  Scalar beta_squared() const { return budget_ - data_fit_; }

  Vec<Scalar> solve(const Vec<Scalar>& rhs) const {
    if (rhs.size() == 0 || factor_.cols() == 0) return Vec<Scalar>::Zero(rhs.size());
    return factor_ * llt_.solve(factor_.transpose() * rhs);
  }

  Mat<Scalar> solve(const Mat<Scalar>& rhs) const {
    if (rhs.rows() == 0 || factor_.cols() == 0) return Mat<Scalar>::Zero(rhs.rows(), rhs.cols());
    return factor_ * llt_.solve(factor_.transpose() * rhs);
  }

  /// Posterior from the projected cross block B = K_{*,1:N} C and the prior
  /// covariance k(x*, x*).
  Posterior<Scalar> posterior(const Mat<Scalar>& cross, const Mat<Scalar>& prior) const {
    Posterior<Scalar> post;
    if (size() == 0) {
      post.mean = Vec<Scalar>::Zero(prior.rows());
      post.covariance = prior;
      return post;
    }
    post.mean = cross * alpha_;
    const Mat<Scalar> rb = solve(Mat<Scalar>(cross.transpose()));
    post.covariance = prior - cross * rb;
    post.covariance = Scalar{0.5} * (post.covariance + post.covariance.transpose()).eval();
    return post;
  }

 private:
  void build_factor(const NoiseModel<Scalar>& noise, Index n) {
    Index cols = 0;
    for (Index j = 0; j < noise.num_constraints(); ++j) {
      if (!capped(j)) cols += noise.constraint(j).factor.cols();
    }
    factor_ = Mat<Scalar>::Zero(n, cols);
    Index at = 0;
    for (Index j = 0; j < noise.num_constraints(); ++j) {
      if (capped(j)) continue;
      using std::sqrt;
      const auto& c = noise.constraint(j);
      const Scalar s = sqrt(weights_(j));
      for (std::size_t a = 0; a < c.support.size(); ++a) {
        factor_.block(c.support[a], at, 1, c.factor.cols()) = s * c.factor.row(static_cast<Index>(a));
      }
      at += c.factor.cols();
    }
    if (cols > n) {
      // Overlapping constraints: compress to an n-column factor of P_sigma.
      const Mat<Scalar> p = factor_ * factor_.transpose();
      const auto es = symmetric_eigen<Scalar>(p);
      const Vec<Scalar> ev = es.values.cwiseMax(Scalar{0});
      using std::sqrt;
      factor_ = es.vectors * ev.cwiseSqrt().asDiagonal();
    }
  }

  Vec<Scalar> sigma_;
  Scalar cap_{kDefaultSigmaCap};
  Vec<Scalar> weights_;
  Vec<Scalar> y_;
  Mat<Scalar> factor_;
  Eigen::LLT<Mat<Scalar>> llt_;
  Vec<Scalar> alpha_;
  Scalar data_fit_{0};
  Scalar budget_{0};
};

template <typename Scalar>
PosteriorFactorization<Scalar> factorize(const Problem<Scalar>& problem, const Vec<Scalar>& sigma,
                                         Scalar cap = Scalar{kDefaultSigmaCap}) {
  problem.validate();
  return PosteriorFactorization<Scalar>(problem, projected_gram(problem), sigma, cap);
}

/// Posterior mean and covariance at a test input.
template <typename Scalar>
Posterior<Scalar> posterior(const PosteriorFactorization<Scalar>& fact, const Problem<Scalar>& problem,
                            const Vec<Scalar>& x_star) {
  const Mat<Scalar> cross = projected_cross(problem.kernel, x_star, problem.inputs, problem.measurements);
  return fact.posterior(cross, problem.kernel(x_star, x_star));
}

/// beta_sigma = sqrt(budget - ||y||^2_{K_hat^-1}); a negative radicand means
/// the data falsify the assumptions.
template <typename Scalar>
Scalar beta_sigma(const PosteriorFactorization<Scalar>& fact) {
  const Scalar r = fact.beta_squared();
  if (r < Scalar{0}) {
    throw InfeasibleError("beta radicand is negative (" + std::to_string(static_cast<double>(r)) +
                          "): data falsify the noise and RKHS-norm assumptions");
  }
  using std::sqrt;
  return sqrt(r);
}

}  // namespace rkhsbound
