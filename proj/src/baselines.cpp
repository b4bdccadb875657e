#include "rkhsbound/baselines.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rkhsbound/errors.hpp"
#include "rkhsbound/linalg.hpp"

namespace rkhsbound {

double uniform_noise_bound(const Problem<double>& problem) {
  const auto& noise = problem.noise;
  if (noise.kind() != NoiseKind::Pointwise) throw std::invalid_argument("baseline requires point-wise noise");
  if (noise.num_constraints() == 0) throw std::invalid_argument("baseline requires at least one measurement");
  const VectorXd g = noise.gammas();
  if (g.maxCoeff() - g.minCoeff() > 1e-12 * g.maxCoeff()) {
    throw std::invalid_argument("baseline requires a uniform point-wise bound");
  }
  return g.maxCoeff();
}

namespace {

struct SplitTerms {
  MatrixXd gram;
  VectorXd bh;      // B^T h
  double kss{0};    // h^T k(x*, x*) h
};

SplitTerms split_terms(const Problem<double>& problem, const BoundQuery<double>& query) {
  problem.validate();
  SplitTerms t;
  t.gram = projected_gram(problem);
  t.bh = projected_cross(problem.kernel, query.x, problem.inputs, problem.measurements).transpose() * query.h;
  t.kss = query.h.dot(problem.kernel(query.x, query.x) * query.h);
  return t;
}

double quadratic_term(const SplitTerms& t, const VectorXd& nu) {
  return t.kss + nu.dot(t.gram * nu) - 2 * t.bh.dot(nu);
}

double objective(const Problem<double>& problem, const SplitTerms& t, double gamma_bar, const VectorXd& nu,
                 double lambda) {
  const double gf = problem.gamma_f;
  return problem.y.dot(nu) + gamma_bar * nu.lpNorm<1>() + lambda * gf * gf + quadratic_term(t, nu) / (4 * lambda);
}

double soft_threshold(double v, double k) { return v > k ? v - k : (v < -k ? v + k : 0.0); }

}  // namespace

double scharnhorst_dual_value(const Problem<double>& problem, const BoundQuery<double>& query, const VectorXd& nu,
                              double lambda) {
  if (!(lambda > 0)) throw std::invalid_argument("scharnhorst dual: lambda must be positive");
  const double gamma_bar = uniform_noise_bound(problem);
  if (nu.size() != problem.size()) throw std::invalid_argument("scharnhorst dual: nu has wrong length");
  return objective(problem, split_terms(problem, query), gamma_bar, nu, lambda);
}

AlternatingResult scharnhorst_alternating(const Problem<double>& problem, const BoundQuery<double>& query,
                                          const AlternatingOptions& opts) {
  const double gamma_bar = problem.noise.kind() == NoiseKind::Pointwise && problem.size() > 0
                               ? uniform_noise_bound(problem)
                               : 0.0;
  const SplitTerms t = split_terms(problem, query);
  const Index n = problem.size();
  const double gf = problem.gamma_f;
  constexpr double kTinyLambda = 1e-300;

  auto lambda_step = [&](const VectorXd& nu) {
    const double c = std::max(0.0, quadratic_term(t, nu));
    return std::max(std::sqrt(c) / (2 * gf), kTinyLambda);
  };

  AlternatingResult res;
  res.nu = VectorXd::Zero(n);
  res.lambda = lambda_step(res.nu);
  res.value = objective(problem, t, gamma_bar, res.nu, res.lambda);
  res.trace.push_back(res.value);
  if (n == 0) {
    res.converged = true;
    return res;
  }

  double lmax = 0;
  {
    lmax = std::max(symmetric_eigen<double>(t.gram, false).values.maxCoeff(), 0.0);
  }

  for (int it = 0; it < opts.max_iterations; ++it) {
    // nu step: FISTA with fixed step 1/L and adaptive restart.
    const double curvature = 1.0 / (2 * res.lambda);
    const double lipschitz = std::max(lmax * curvature, std::numeric_limits<double>::min());
    const double step = 1.0 / lipschitz;
    auto smooth_grad = [&](const VectorXd& nu) -> VectorXd {
      return problem.y + curvature * (t.gram * nu - t.bh);
    };
    VectorXd x = res.nu;
    VectorXd z = x;
    double momentum = 1.0;
    for (int k = 0; k < opts.inner_iterations; ++k) {
      const VectorXd g = smooth_grad(z);
      VectorXd next = z - step * g;
      for (Index i = 0; i < n; ++i) next(i) = soft_threshold(next(i), step * gamma_bar);
      const double mnext = 0.5 * (1 + std::sqrt(1 + 4 * momentum * momentum));
      const VectorXd diff = next - x;
      if ((z - next).dot(diff) > 0) {
        // Restart when the momentum direction opposes progress.
        z = next;
        momentum = 1.0;
      } else {
        z = next + ((momentum - 1) / mnext) * diff;
        momentum = mnext;
      }
      x = next;
      if (diff.norm() * lipschitz <= opts.inner_tolerance * (1 + problem.y.norm() + t.bh.norm() * curvature)) break;
    }
    const double before = objective(problem, t, gamma_bar, res.nu, res.lambda);
    if (objective(problem, t, gamma_bar, x, res.lambda) < before) res.nu = x;
    res.lambda = lambda_step(res.nu);
    const double value = objective(problem, t, gamma_bar, res.nu, res.lambda);
    const double previous = res.value;
    res.value = std::min(value, previous);
    res.trace.push_back(res.value);
    res.iterations = it + 1;
    if (res.value <= opts.target_value) {
      res.converged = true;
      break;
    }
    if (previous - res.value <= opts.tolerance * std::max(1.0, std::abs(previous))) {
      res.converged = true;
      break;
    }
  }
  return res;
}

double fixed_sigma_level(const Problem<double>& problem, FixedSigmaVariant variant) {
  const double gamma_bar = uniform_noise_bound(problem);
  return variant == FixedSigmaVariant::Hashimoto ? gamma_bar
                                                 : std::sqrt(static_cast<double>(problem.size())) * gamma_bar;
}

Envelope fixed_sigma_bound(const Problem<double>& problem, const VectorXd& x_star, const VectorXd& h,
                           FixedSigmaVariant variant) {
  const Index m = problem.noise.num_constraints();
  VectorXd sigma = VectorXd::Constant(m, kDefaultSigmaCap);
  if (problem.size() > 0) sigma.setConstant(fixed_sigma_level(problem, variant));
  const DualObjective<double> obj(problem, {x_star, h});
  const auto ev = obj.evaluate(sigma, false);
  return {h.dot(ev.posterior.mean), ev.beta * ev.spread};
}

BoxQpResult solve_box_qp(const MatrixXd& r, const VectorXd& y, double bound, double tolerance, int max_iterations) {
  const Index n = y.size();
  auto project = [&](VectorXd w) {
    return w.cwiseMax(-bound).cwiseMin(bound).eval();
  };
  auto value = [&](const VectorXd& w) {
    const VectorXd d = y - w;
    return d.dot(r * d);
  };
  auto gradient = [&](const VectorXd& w) -> VectorXd { return -2 * (r * (y - w)); };

  BoxQpResult res;
  VectorXd w = project(y);
  VectorXd g = gradient(w);
  double alpha = 1.0 / std::max(2 * r.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const double scale = 1 + g.cwiseAbs().maxCoeff();
  double f = value(w);
  for (int k = 0; k < max_iterations; ++k) {
    res.stationarity = (w - project(w - g)).cwiseAbs().maxCoeff();
    if (res.stationarity <= tolerance * scale) break;
    // Nonmonotone-safe: backtrack only if the BB step increases the objective.
    VectorXd next = project(w - alpha * g);
    double fn = value(next);
    for (int ls = 0; ls < 50 && fn > f; ++ls) {
      alpha *= 0.5;
      next = project(w - alpha * g);
      fn = value(next);
    }
    const VectorXd gn = gradient(next);
    const VectorXd s = next - w;
    const VectorXd dy = gn - g;
    const double sy = s.dot(dy);
    alpha = sy > 0 ? s.squaredNorm() / sy : alpha * 2;
    w = next;
    g = gn;
    f = fn;
    res.iterations = k + 1;
  }
  res.w = w;
  res.value = value(w);
  res.stationarity = (w - project(w - g)).cwiseAbs().maxCoeff();
  (void)n;
  return res;
}

Envelope reed_bound(const Problem<double>& problem, const VectorXd& x_star, const VectorXd& h, double sigma_bar) {
  if (!(sigma_bar > 0)) throw std::invalid_argument("reed bound: sigma_bar must be positive");
  problem.validate();
  const Index n = problem.size();
  const double gf2 = problem.gamma_f * problem.gamma_f;
  const double prior = std::sqrt(std::max(0.0, h.dot(problem.kernel(x_star, x_star) * h)));
  if (n == 0) return {0.0, problem.gamma_f * prior};
  const double gamma_bar = uniform_noise_bound(problem);

  const MatrixXd gram = projected_gram(problem);
  const PosteriorFactorization<double> fact(problem, gram, VectorXd::Constant(n, sigma_bar));
  const MatrixXd cross = projected_cross(problem.kernel, x_star, problem.inputs, problem.measurements);
  const auto post = fact.posterior(cross, problem.kernel(x_star, x_star));
  const MatrixXd r = fact.solve(MatrixXd(MatrixXd::Identity(n, n)));
  const MatrixXd rs = 0.5 * (r + r.transpose());

  const BoxQpResult qp = solve_box_qp(rs, problem.y, gamma_bar);
  const double radicand = gf2 - qp.value;
  if (radicand < 0) throw InfeasibleError("reed bound: beta_max radicand is negative");
  const double spread = std::sqrt(std::max(0.0, h.dot(post.covariance * h)));
  const VectorXd weights = fact.solve(VectorXd(cross.transpose() * h));
  return {h.dot(post.mean), std::sqrt(radicand) * spread + gamma_bar * weights.lpNorm<1>()};
}

}  // namespace rkhsbound
