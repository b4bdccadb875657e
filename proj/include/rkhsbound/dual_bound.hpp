#pragma once

// The GP-based dual function over noise parameters sigma, its analytic
// gradient, and its minimization. Every sigma yields a valid upper bound on
// h^T f(x*); the infimum over sigma is the exact worst case.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "rkhsbound/errors.hpp"
#include "rkhsbound/gp_core.hpp"
#include "rkhsbound/types.hpp"

namespace rkhsbound {

template <typename Scalar>
struct BoundQuery {
  Vec<Scalar> x;  // test input
  Vec<Scalar> h;  // direction in output space
};

template <typename Scalar>
struct DualEvaluation {
  Scalar value{0};
  Scalar beta{0};
  Scalar spread{0};  // sqrt(h^T Sigma h)
  Posterior<Scalar> posterior;
  Vec<Scalar> gradient;      // d value / d sigma
  Vec<Scalar> log_gradient;  // d value / d log sigma
};

/// Dual function for a fixed problem and query. Holds the projected Gram,
/// the cross block and the prior so that each sigma costs one factorization.
/// The problem must outlive the objective.
template <typename Scalar>
class DualObjective {
 public:
  DualObjective(const Problem<Scalar>& problem, Mat<Scalar> gram, const BoundQuery<Scalar>& query,
                Scalar cap = Scalar{kDefaultSigmaCap})
      : problem_(&problem), gram_(std::move(gram)), h_(query.h), cap_(cap) {
    if (query.h.size() != problem.output_dim()) throw std::invalid_argument("direction h must have length n_f");
    cross_ = projected_cross(problem.kernel, query.x, problem.inputs, problem.measurements);
    prior_ = problem.kernel(query.x, query.x);
    b_ = cross_.transpose() * h_;
  }

  DualObjective(const Problem<Scalar>& problem, const BoundQuery<Scalar>& query,
                Scalar cap = Scalar{kDefaultSigmaCap})
      : DualObjective(problem, (problem.validate(), projected_gram(problem)), query, cap) {}

  const Problem<Scalar>& problem() const { return *problem_; }
  Index num_parameters() const { return problem_->noise.num_constraints(); }
  Scalar cap() const { return cap_; }

  /// gamma_f sqrt(h^T k(x*, x*) h), the limit for sigma -> infinity.
  Scalar prior_bound() const {
    using std::sqrt;
    return problem_->gamma_f * sqrt(std::max(Scalar{0}, h_.dot(prior_ * h_)));
  }

  DualEvaluation<Scalar> evaluate(const Vec<Scalar>& sigma, bool with_gradient = true) const {
    using std::sqrt;
    const PosteriorFactorization<Scalar> fact(*problem_, gram_, sigma, cap_);
    DualEvaluation<Scalar> ev;
    ev.beta = beta_sigma(fact);
    ev.posterior = fact.posterior(cross_, prior_);
    const Scalar var = std::max(Scalar{0}, h_.dot(ev.posterior.covariance * h_));
    ev.spread = sqrt(var);
    ev.value = h_.dot(ev.posterior.mean) + ev.beta * ev.spread;
    if (!with_gradient) return ev;

    const Index m = num_parameters();
    ev.gradient = Vec<Scalar>::Zero(m);
    ev.log_gradient = Vec<Scalar>::Zero(m);
    if (m == 0) return ev;
    if (ev.beta == Scalar{0}) throw NumericalError("dual gradient undefined at beta = 0 (boundary of feasibility)");

    // d K_hat^-1 / d t_j = E P_j E^T with E = I - K_hat^-1 G, t_j = sigma_j^-2.
    const Vec<Scalar> u = problem_->y - gram_ * fact.alpha();
    const Vec<Scalar> v = b_ - gram_ * fact.solve(b_);
    const auto& noise = problem_->noise;
    for (Index j = 0; j < m; ++j) {
      if (fact.capped(j)) continue;
      const auto& c = noise.constraint(j);
      const Scalar vpu = c.bilinear(v, u);
      const Scalar upu = c.quadratic(u);
      const Scalar vpv = c.quadratic(v);
      Scalar dt = vpu + ev.spread * (c.gamma * c.gamma - upu) / (2 * ev.beta);
      if (ev.spread > Scalar{0}) dt -= ev.beta * vpv / (2 * ev.spread);
      const Scalar t = fact.weights()(j);
      ev.gradient(j) = -2 * t / sigma(j) * dt;
      ev.log_gradient(j) = -2 * t * dt;
    }
    return ev;
  }

 private:
  const Problem<Scalar>* problem_;
  Mat<Scalar> gram_;
  Mat<Scalar> cross_;
  Mat<Scalar> prior_;
  Vec<Scalar> h_;
  Vec<Scalar> b_;
  Scalar cap_;
};

/// Upper bound on h^T f(x*) for one noise parameter vector.
template <typename Scalar>
Scalar dual_value(const Problem<Scalar>& problem, const BoundQuery<Scalar>& query, const Vec<Scalar>& sigma) {
  return DualObjective<Scalar>(problem, query).evaluate(sigma, false).value;
}

/// Gradient of the dual function with respect to sigma.
template <typename Scalar>
Vec<Scalar> dual_gradient(const Problem<Scalar>& problem, const BoundQuery<Scalar>& query, const Vec<Scalar>& sigma) {
  return DualObjective<Scalar>(problem, query).evaluate(sigma, true).gradient;
}

template <typename Scalar>
struct OptimizerOptions {
  Scalar learning_rate{0.1};
  int max_iterations{100};
  Scalar gradient_tolerance{1e-7};  // relative to |value|
  Scalar beta1{0.9};
  Scalar beta2{0.999};
  Scalar epsilon{1e-8};
  Scalar sigma_cap{kDefaultSigmaCap};
  Scalar sigma_floor{1e-8};
  // Defaults to gamma_j for pointwise/energy noise and 1 otherwise.
  std::optional<Vec<Scalar>> initial_sigma;
  // Quasi-Newton (BFGS, log sigma) steps after the adaptive-moment phase.
  int refine_iterations{0};
  // Extra searches from the default sigma and one decade on either side of
  // it; the best result wins.
  int restarts{0};

  /// Adam followed by quasi-Newton refinement; used where the optimum is
  /// needed to high accuracy.
  static OptimizerOptions tight() {
    OptimizerOptions o;
    o.max_iterations = 300;
    o.refine_iterations = 300;
    o.gradient_tolerance = Scalar{1e-10};
    o.restarts = 3;
    return o;
  }

  void validate() const {
    if (!(learning_rate > Scalar{0})) throw std::invalid_argument("learning rate must be positive");
    if (max_iterations < 1) throw std::invalid_argument("max iterations must be at least 1");
    if (restarts < 0 || restarts > 3) throw std::invalid_argument("restarts must be between 0 and 3");
    if (!(sigma_cap > sigma_floor) || !(sigma_floor > Scalar{0})) throw std::invalid_argument("invalid sigma range");
  }
};

enum class BoundStatus { Converged, IterationLimit, BoundaryLimit };

inline const char* to_string(BoundStatus s) {
  switch (s) {
    case BoundStatus::Converged: return "converged";
    case BoundStatus::IterationLimit: return "iteration-limit";
    case BoundStatus::BoundaryLimit: return "boundary-limit";
  }
  return "unknown";
}

template <typename Scalar>
struct BoundCertificate {
  Scalar value{0};
  Vec<Scalar> sigma;
  Scalar beta{0};
  Posterior<Scalar> posterior;
  Scalar gradient_norm{0};  // log-sigma gradient at the returned point
  int iterations{0};
  BoundStatus status{BoundStatus::Converged};
  Scalar initial_value{0};
  Scalar prior_bound{0};
  Index frozen{0};  // components at the cap
};

namespace detail {

template <typename Scalar>
class SigmaSearch {
 public:
  SigmaSearch(const DualObjective<Scalar>& objective, const OptimizerOptions<Scalar>& opts)
      : obj_(objective), opts_(opts) {
    using std::log;
    log_cap_ = log(opts.sigma_cap);
    log_floor_ = log(opts.sigma_floor);
  }

  Vec<Scalar> to_sigma(const Vec<Scalar>& s) const { return s.array().exp().matrix(); }

  struct Point {
    Vec<Scalar> s;
    DualEvaluation<Scalar> eval;
    Eigen::Array<bool, Eigen::Dynamic, 1> frozen;
    bool stalled{false};  // no decrease representable along a descent direction
  };

  Point evaluate(Vec<Scalar> s, Eigen::Array<bool, Eigen::Dynamic, 1> frozen) const {
    for (Index j = 0; j < s.size(); ++j) {
      if (s(j) >= log_cap_) {
        s(j) = log_cap_;
        frozen(j) = true;
      }
      s(j) = std::max(s(j), log_floor_);
    }
    Vec<Scalar> sigma = to_sigma(s);
    for (Index j = 0; j < s.size(); ++j) {
      if (frozen(j)) sigma(j) = opts_.sigma_cap;
    }
    Point p{std::move(s), obj_.evaluate(sigma, true), std::move(frozen)};
    for (Index j = 0; j < p.s.size(); ++j) {
      if (p.frozen(j)) p.eval.log_gradient(j) = Scalar{0};
    }
    return p;
  }

  Scalar gradient_norm(const Point& p) const { return p.eval.log_gradient.norm(); }

  bool converged(const Point& p) const {
    using std::abs;
    const Scalar scale = std::max(abs(p.eval.value), std::numeric_limits<Scalar>::min());
    return gradient_norm(p) <= opts_.gradient_tolerance * scale;
  }

  /// Stationary to working precision: stalled with a small gradient.
  bool stationary(const Point& p) const {
    using std::abs;
    const Scalar scale = std::max(abs(p.eval.value), std::numeric_limits<Scalar>::min());
    return converged(p) || (p.stalled && gradient_norm(p) <= Scalar{1e-6} * scale);
  }

  // Adaptive-moment descent in log sigma; returns the best point visited.
  Point adam(Point start, int& iterations) const {
    const Index m = start.s.size();
    Vec<Scalar> first = Vec<Scalar>::Zero(m);
    Vec<Scalar> second = Vec<Scalar>::Zero(m);
    Point cur = start;
    Point best = start;
    Scalar b1t{1};
    Scalar b2t{1};
    for (int k = 0; k < opts_.max_iterations; ++k) {
      if (converged(cur)) break;
      const Vec<Scalar>& g = cur.eval.log_gradient;
      first = opts_.beta1 * first + (1 - opts_.beta1) * g;
      second = opts_.beta2 * second + (1 - opts_.beta2) * g.cwiseAbs2();
      b1t *= opts_.beta1;
      b2t *= opts_.beta2;
      Vec<Scalar> s = cur.s;
      for (Index j = 0; j < m; ++j) {
        if (cur.frozen(j)) continue;
        using std::sqrt;
        const Scalar mhat = first(j) / (1 - b1t);
        const Scalar vhat = second(j) / (1 - b2t);
        s(j) -= opts_.learning_rate * mhat / (sqrt(vhat) + opts_.epsilon);
      }
      cur = evaluate(std::move(s), cur.frozen);
      ++iterations;
      if (cur.eval.value < best.eval.value) best = cur;
    }
    return best;
  }

  // BFGS on the free log-sigma components with Armijo backtracking.
  Point refine(Point cur, int& iterations) const {
    const Index m = cur.s.size();
    Mat<Scalar> hinv = Mat<Scalar>::Identity(m, m);
    bool fresh = true;
    for (int k = 0; k < opts_.refine_iterations; ++k) {
      if (converged(cur)) break;
      const Vec<Scalar>& g = cur.eval.log_gradient;
      Vec<Scalar> dir = -(hinv * g);
      for (Index j = 0; j < m; ++j) {
        if (cur.frozen(j)) dir(j) = Scalar{0};
      }
      if (!(dir.dot(g) < Scalar{0})) {
        hinv.setIdentity();
        fresh = true;
        dir = -g;
        for (Index j = 0; j < m; ++j) {
          if (cur.frozen(j)) dir(j) = Scalar{0};
        }
      }
      const Scalar longest = dir.cwiseAbs().maxCoeff();
      if (!(longest > Scalar{0})) break;
      // Without curvature information take a unit step in the largest component.
      if (fresh) dir /= longest;
      if (longest > Scalar{4}) dir *= Scalar{4} / longest;

      const Scalar slope = dir.dot(g);
      Scalar step{1};
      std::optional<Point> next;
      for (int ls = 0; ls < 60; ++ls) {
        try {
          Point trial = evaluate(cur.s + step * dir, cur.frozen);
          if (trial.eval.value < cur.eval.value && trial.eval.value <= cur.eval.value + Scalar{1e-4} * step * slope) {
            next = std::move(trial);
            break;
          }
        } catch (const NumericalError&) {
        }
        step *= Scalar{0.5};
      }
      ++iterations;
      if (!next) {
        cur.stalled = true;
        break;
      }
      const bool newly_frozen = (next->frozen != cur.frozen).any();
      const Vec<Scalar> ds = next->s - cur.s;
      const Vec<Scalar> dg = next->eval.log_gradient - g;
      cur = std::move(*next);
      if (newly_frozen) {
        hinv.setIdentity();
        fresh = true;
        continue;
      }
      const Scalar sy = ds.dot(dg);
      if (sy > std::numeric_limits<Scalar>::epsilon() * ds.norm() * dg.norm()) {
        if (fresh) hinv *= sy / dg.squaredNorm();
        fresh = false;
        const Scalar rho = 1 / sy;
        const Mat<Scalar> eye = Mat<Scalar>::Identity(m, m);
        hinv = (eye - rho * ds * dg.transpose()) * hinv * (eye - rho * dg * ds.transpose()) +
               rho * ds * ds.transpose();
      }
    }
    return cur;
  }

 private:
  const DualObjective<Scalar>& obj_;
  const OptimizerOptions<Scalar>& opts_;
  Scalar log_cap_;
  Scalar log_floor_;
};

}  // namespace detail

/// Minimize the dual function over sigma for a prepared objective.
template <typename Scalar>
BoundCertificate<Scalar> optimize_bound(const DualObjective<Scalar>& objective,
                                        const OptimizerOptions<Scalar>& opts = {}) {
  opts.validate();
  const auto& problem = objective.problem();
  const Index m = objective.num_parameters();
  BoundCertificate<Scalar> cert;
  cert.prior_bound = objective.prior_bound();

  if (problem.size() == 0) {
    // No data: the infimum is the prior bound, approached as sigma -> infinity.
    cert.sigma = Vec<Scalar>::Constant(m, opts.sigma_cap);
    const auto ev = objective.evaluate(cert.sigma, false);
    cert.value = ev.value;
    cert.initial_value = ev.value;
    cert.beta = ev.beta;
    cert.posterior = ev.posterior;
    cert.frozen = m;
    return cert;
  }

  const Vec<Scalar> fallback = problem.noise.default_sigma();
  const Vec<Scalar> sigma0 = opts.initial_sigma ? *opts.initial_sigma : fallback;
  if (sigma0.size() != m) throw std::invalid_argument("initial sigma has wrong length");
  detail::SigmaSearch<Scalar> search(objective, opts);
  using Point = typename detail::SigmaSearch<Scalar>::Point;

  auto first_point = [&](Vec<Scalar> sigma) {
    const Eigen::Array<bool, Eigen::Dynamic, 1> frozen = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(m, false);
    // Back off towards the prior while the radicand is negative at the start.
    for (;;) {
      try {
        return search.evaluate(sigma.array().log().matrix(), frozen);
      } catch (const InfeasibleError&) {
        if ((sigma.array() >= opts.sigma_cap).all()) throw;
        sigma = (2 * sigma).cwiseMin(opts.sigma_cap);
      }
    }
  };
  int iterations = 0;
  auto run = [&](const Vec<Scalar>& sigma) {
    Point p = search.adam(first_point(sigma), iterations);
    if (opts.refine_iterations > 0) p = search.refine(std::move(p), iterations);
    return p;
  };

  const Point start = first_point(sigma0);
  cert.initial_value = start.eval.value;
  Point best = search.adam(start, iterations);
  if (opts.refine_iterations > 0) best = search.refine(std::move(best), iterations);
  const Scalar spread[] = {Scalar{1}, Scalar{10}, Scalar{0.1}};
  for (int r = 0; r < opts.restarts; ++r) {
    const Vec<Scalar> s = fallback * spread[r];
    if (opts.initial_sigma && s == *opts.initial_sigma) continue;
    Point p = run(s);
    if (p.eval.value < best.eval.value) best = std::move(p);
  }

  cert.value = best.eval.value;
  cert.sigma = search.to_sigma(best.s);
  for (Index j = 0; j < m; ++j) {
    if (best.frozen(j)) cert.sigma(j) = opts.sigma_cap;
  }
  cert.beta = best.eval.beta;
  cert.posterior = best.eval.posterior;
  cert.gradient_norm = search.gradient_norm(best);
  cert.iterations = iterations;
  cert.frozen = best.frozen.count();
  if (search.stationary(best)) {
    cert.status = BoundStatus::Converged;
  } else if (cert.frozen > 0) {
    cert.status = BoundStatus::BoundaryLimit;
  } else {
    cert.status = BoundStatus::IterationLimit;
  }
  return cert;
}

template <typename Scalar>
BoundCertificate<Scalar> optimize_bound(const Problem<Scalar>& problem, const BoundQuery<Scalar>& query,
                                        const OptimizerOptions<Scalar>& opts = {}) {
  const DualObjective<Scalar> objective(problem, query, opts.sigma_cap);
  return optimize_bound(objective, opts);
}

/// Corollary-style ellipsoid: ||f(x*) - mean||_{cov^-1} <= beta.
template <typename Scalar>
struct EllipsoidBound {
  Vec<Scalar> mean;
  Mat<Scalar> covariance;
  Scalar beta{0};

  /// ||f - mean||^2_{cov^-1} - beta^2; non-positive inside the ellipsoid.
  Scalar excess(const Vec<Scalar>& f) const {
    const Vec<Scalar> d = f - mean;
    return d.dot(covariance.ldlt().solve(d)) - beta * beta;
  }

  /// Support function h^T mean + beta sqrt(h^T cov h).
  Scalar support(const Vec<Scalar>& h) const {
    using std::sqrt;
    return h.dot(mean) + beta * sqrt(std::max(Scalar{0}, h.dot(covariance * h)));
  }
};

template <typename Scalar>
EllipsoidBound<Scalar> ellipsoid_bound(const Problem<Scalar>& problem, const Vec<Scalar>& x_star,
                                       const Vec<Scalar>& sigma, Scalar cap = Scalar{kDefaultSigmaCap}) {
  const auto fact = factorize(problem, sigma, cap);
  const auto post = posterior(fact, problem, x_star);
  EllipsoidBound<Scalar> e{post.mean, post.covariance, beta_sigma(fact)};
  if (!(symmetric_eigen<Scalar>(e.covariance, false).values(0) > Scalar{1e-12} * e.covariance.trace())) {
    throw SingularCovarianceError("posterior covariance is singular at the test point");
  }
  return e;
}

template <typename Scalar>
struct Interval {
  Scalar lower{0};
  Scalar upper{0};
};

/// Tightest containment interval along h: [-fbar_{-h}, fbar_h].
template <typename Scalar>
Interval<Scalar> two_sided_interval(const Problem<Scalar>& problem, const Vec<Scalar>& x_star,
                                    const Vec<Scalar>& h, const OptimizerOptions<Scalar>& opts = {}) {
  problem.validate();
  const Mat<Scalar> gram = projected_gram(problem);
  const DualObjective<Scalar> up(problem, gram, {x_star, h}, opts.sigma_cap);
  const DualObjective<Scalar> down(problem, gram, {x_star, -h}, opts.sigma_cap);
  return {-optimize_bound(down, opts).value, optimize_bound(up, opts).value};
}

}  // namespace rkhsbound
