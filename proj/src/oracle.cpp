#include "rkhsbound/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "rkhsbound/errors.hpp"
#include "rkhsbound/kernels.hpp"

namespace rkhsbound {

FeatureModel build_feature_model(const Problem<double>& problem, const VectorXd& x_star, double rank_threshold) {
  problem.validate();
  const Index n = problem.size();
  const Index nf = problem.output_dim();
  PointList<double> points = problem.inputs;
  points.push_back(x_star);
  const auto fs = factorize_gram(kernel_matrix(problem.kernel, points), nf, rank_threshold);

  FeatureModel fm;
  fm.phi = fs.features;
  fm.design.resize(fm.rank(), n);
  for (Index i = 0; i < n; ++i) {
    fm.design.col(i) = fm.phi.middleRows(i * nf, nf).transpose() * problem.measurements.col(i);
  }
  fm.test_block = fm.phi.middleRows(n * nf, nf);
  return fm;
}

VectorXd primal_margins(const Problem<double>& problem, const FeatureModel& fm, const VectorXd& theta) {
  const auto& noise = problem.noise;
  VectorXd m(noise.num_constraints() + 1);
  m(0) = problem.gamma_f * problem.gamma_f - theta.squaredNorm();
  const VectorXd e = problem.y - fm.design.transpose() * theta;
  m.tail(noise.num_constraints()) = noise.margins(e);
  return m;
}

VectorXd interpolant_coefficients(const FeatureModel& fm, const VectorXd& stacked_values) {
  if (stacked_values.size() != fm.phi.rows()) throw std::invalid_argument("stacked values have wrong length");
  return fm.phi.completeOrthogonalDecomposition().solve(stacked_values);
}

VectorXd PrimalSolution::sigma() const {
  VectorXd s(std::max<Index>(lambda.size() - 1, 0));
  for (Index j = 0; j < s.size(); ++j) {
    const double lj = lambda(j + 1);
    s(j) = lj > 0 ? std::sqrt(lambda(0) / lj) : std::numeric_limits<double>::infinity();
  }
  return s;
}

namespace {

// Lagrange dual d(lambda) = sup_theta L(theta, lambda) with its gradient and
// Hessian in lambda.
class LagrangeDual {
 public:
  LagrangeDual(const Problem<double>& problem, const FeatureModel& fm, VectorXd q)
      : problem_(problem), fm_(fm), q_(std::move(q)), scale_(VectorXd::Ones(dim())) {
    for (Index j = 0; j + 1 < dim(); ++j) {
      const double g = problem.noise.constraint(j).gamma;
      scale_(j + 1) = 1.0 / (g * g);
    }
  }

  struct Point {
    double value{0};
    VectorXd gradient;  // -c_k(theta*)
    MatrixXd hessian;
    VectorXd theta;
  };

  Index dim() const { return problem_.noise.num_constraints() + 1; }

  /// Multipliers of the constraints normalized to unit radius.
  VectorXd unscale(const VectorXd& normalized) const { return scale_.cwiseProduct(normalized); }

  /// Evaluation in normalized multipliers; gradient and Hessian refer to them.
  Point evaluate(const VectorXd& normalized) const {
    Point pt = evaluate_raw(unscale(normalized));
    pt.gradient = scale_.cwiseProduct(pt.gradient);
    pt.hessian = scale_.asDiagonal() * pt.hessian * scale_.asDiagonal();
    return pt;
  }

 private:
  Point evaluate_raw(const VectorXd& lambda) const {
    const auto& noise = problem_.noise;
    const MatrixXd& a = fm_.design;
    const Index r = a.rows();
    const Index m = noise.num_constraints();

    // Q = lambda_0 I + A P A^T = R^T R from a QR of the stacked square roots,
    // heavy constraint rows first. theta is the matching least-squares solution.
    Index rows = r;
    for (Index j = 0; j < m; ++j) rows += noise.constraint(j).factor.cols();
    MatrixXd stacked(rows, r);
    VectorXd rhs(rows);
    Index row = 0;
    for (Index j = 0; j < m; ++j) {
      const auto& c = noise.constraint(j);
      MatrixXd as(r, static_cast<Index>(c.support.size()));
      for (std::size_t k = 0; k < c.support.size(); ++k) as.col(static_cast<Index>(k)) = a.col(c.support[k]);
      const double w = std::sqrt(std::max(lambda(j + 1), 0.0));
      stacked.middleRows(row, c.factor.cols()) = w * c.factor.transpose() * as.transpose();
      rhs.segment(row, c.factor.cols()) = w * c.factor.transpose() * c.gather(problem_.y);
      row += c.factor.cols();
    }
    const double w0 = std::sqrt(lambda(0));
    stacked.bottomRows(r) = w0 * MatrixXd::Identity(r, r);
    rhs.tail(r) = q_ / (2 * w0);
    if (!stacked.allFinite() || !rhs.allFinite()) throw NumericalError("primal oracle: inner Hessian is not finite");
    const Eigen::HouseholderQR<MatrixXd> qr(stacked);
    const MatrixXd rf = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    if ((rf.diagonal().array().abs() <= 0).any()) throw NumericalError("primal oracle: inner Hessian is singular");
    auto solve = [&](const MatrixXd& b) -> MatrixXd {
      const MatrixXd z = rf.transpose().triangularView<Eigen::Lower>().solve(b);
      return rf.triangularView<Eigen::Upper>().solve(z);
    };

    Point pt;
    pt.theta = qr.solve(rhs);
    const VectorXd e = problem_.y - a.transpose() * pt.theta;

    MatrixXd jac(dim(), r);
    pt.gradient.resize(dim());
    const double gf2 = problem_.gamma_f * problem_.gamma_f;
    pt.gradient(0) = gf2 - pt.theta.squaredNorm();
    jac.row(0) = 2 * pt.theta.transpose();
    for (Index j = 0; j < m; ++j) {
      const auto& c = noise.constraint(j);
      const VectorXd pe = c.block * c.gather(e);
      VectorXd grad = VectorXd::Zero(r);
      for (std::size_t k = 0; k < c.support.size(); ++k) grad += pe(static_cast<Index>(k)) * a.col(c.support[k]);
      jac.row(j + 1) = -2 * grad.transpose();
      pt.gradient(j + 1) = c.gamma * c.gamma - c.gather(e).dot(pe);
    }
    pt.value = q_.dot(pt.theta) + lambda.dot(pt.gradient);
    pt.hessian = 0.5 * jac * solve(jac.transpose());
    pt.hessian = 0.5 * (pt.hessian + pt.hessian.transpose()).eval();
    return pt;
  }

  const Problem<double>& problem_;
  const FeatureModel& fm_;
  VectorXd q_;
  VectorXd scale_;
};

}  // namespace

PrimalSolution solve_primal(const Problem<double>& problem, const FeatureModel& fm, const VectorXd& h,
                            const PrimalOptions& opts) {
  problem.validate();
  if (h.size() != problem.output_dim()) throw std::invalid_argument("direction h must have length n_f");
  const VectorXd q = fm.objective(h);
  const double scale = q.norm() * problem.gamma_f;
  const Index ncon = problem.noise.num_constraints();
  if (!std::isfinite(scale) || !fm.design.allFinite()) throw NumericalError("primal oracle: feature model is not finite");

  PrimalSolution sol;
  sol.lambda = VectorXd::Zero(ncon + 1);
  if (scale == 0.0) {
    sol.theta = VectorXd::Zero(fm.rank());
    return sol;
  }

  const LagrangeDual dual(problem, fm, q);
  const Index m = dual.dim();
  VectorXd lambda(m);
  lambda.setConstant(q.norm() / (2 * problem.gamma_f));

  auto barrier = [&](const LagrangeDual::Point& p, const VectorXd& l, double mu) {
    return p.value - mu * l.array().log().sum();
  };

  double mu = 0.1 * scale / static_cast<double>(m);
  LagrangeDual::Point cur = dual.evaluate(lambda);
  int steps = 0;
  for (;;) {
    // Centering for the current barrier weight.
    for (;;) {
      if (cur.value < -scale * (1 + 1e-8)) {
        throw InfeasibleError("primal oracle: dual unbounded below, the constraints admit no feasible point");
      }
      const VectorXd grad = cur.gradient - mu * lambda.cwiseInverse();
      MatrixXd hb = cur.hessian;
      hb.diagonal() += mu * lambda.cwiseAbs2().cwiseInverse();
      const VectorXd step = -hb.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      const double resolution = 4 * std::numeric_limits<double>::epsilon() * (std::abs(cur.value) + scale);
      if (!(decrement > std::max(1e-9 * mu, resolution)) || !std::isfinite(decrement)) break;
      if (++steps > opts.max_newton_steps) {
        throw NonConvergenceError("primal oracle: Newton step budget exhausted");
      }
      double alpha = 1.0;
      for (Index i = 0; i < m; ++i) {
        if (step(i) < 0) alpha = std::min(alpha, -0.99 * lambda(i) / step(i));
      }
      const double f0 = barrier(cur, lambda, mu);
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        const VectorXd trial = lambda + alpha * step;
        try {
          auto pt = dual.evaluate(trial);
          if (barrier(pt, trial, mu) <= f0 - 0.25 * alpha * decrement) {
            lambda = trial;
            cur = std::move(pt);
            moved = true;
            break;
          }
        } catch (const NumericalError&) {
        }
        alpha *= 0.5;
      }
      if (!moved) break;
    }
    if (static_cast<double>(m) * mu <= opts.tolerance * scale) break;
    mu *= 0.1;
  }

  sol.theta = cur.theta;
  sol.lambda = dual.unscale(lambda);
  sol.value = q.dot(cur.theta);
  sol.dual_value = cur.value;
  sol.iterations = steps;
  const VectorXd margins = primal_margins(problem, fm, cur.theta);
  double infeas = std::max(0.0, -margins(0)) / (problem.gamma_f * problem.gamma_f);
  for (Index j = 0; j < ncon; ++j) {
    const double g = problem.noise.constraint(j).gamma;
    infeas = std::max(infeas, std::max(0.0, -margins(j + 1)) / (g * g));
  }
  sol.kkt_residual = std::abs(sol.dual_value - sol.value) / scale + infeas;
  return sol;
}

PrimalSolution solve_primal(const Problem<double>& problem, const BoundQuery<double>& query,
                            const PrimalOptions& opts) {
  const FeatureModel fm = build_feature_model(problem, query.x, opts.rank_threshold);
  return solve_primal(problem, fm, query.h, opts);
}

RelaxedSolution relaxed_solution(const Problem<double>& problem, const FeatureModel& fm, const VectorXd& h,
                                 const VectorXd& sigma, double cap) {
  const auto& noise = problem.noise;
  if (sigma.size() != noise.num_constraints()) throw std::invalid_argument("sigma has wrong length");
  const VectorXd t = noise_weights(sigma, cap);
  const MatrixXd p = noise.weighted_sum(t);
  const MatrixXd& a = fm.design;
  const MatrixXd ap = a * p;
  MatrixXd s = ap * a.transpose();
  s.diagonal().array() += 1.0;
  const Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw NumericalError("relaxed solution: S is not positive definite");

  RelaxedSolution out;
  const VectorXd apy = ap * problem.y;
  out.theta_mean = llt.solve(apy);
  out.data_fit = problem.y.dot(p * problem.y) - apy.dot(out.theta_mean);
  out.budget = problem.gamma_f * problem.gamma_f;
  for (Index j = 0; j < noise.num_constraints(); ++j) {
    out.budget += t(j) * noise.constraint(j).gamma * noise.constraint(j).gamma;
  }
  const double radicand = out.budget - out.data_fit;
  if (radicand < 0) throw InfeasibleError("relaxed program is infeasible at this sigma");

  const VectorXd q = fm.objective(h);
  const VectorXd sq = llt.solve(q);
  out.q_norm_sq = q.dot(sq);
  const double qn = std::sqrt(std::max(0.0, out.q_norm_sq));
  out.value = q.dot(out.theta_mean) + std::sqrt(radicand) * qn;
  out.theta_star = out.theta_mean;
  if (qn > 0) out.theta_star += std::sqrt(radicand) / qn * sq;
  return out;
}

double relaxed_closed_form(const Problem<double>& problem, const BoundQuery<double>& query, const VectorXd& sigma,
                           double cap) {
  // Keep every positive eigen-direction so both routes describe the same problem.
  const FeatureModel fm = build_feature_model(problem, query.x, 0.0);
  return relaxed_solution(problem, fm, query.h, sigma, cap).value;
}

namespace {

// Open interval of t with theta + t d inside every constraint.
bool chord(const Problem<double>& problem, const FeatureModel& fm, const VectorXd& theta, const VectorXd& d,
           double& lo, double& hi) {
  lo = -std::numeric_limits<double>::infinity();
  hi = std::numeric_limits<double>::infinity();
  auto clip = [&](double qa, double qb, double qc) {
    // qa t^2 + qb t + qc < 0 with qc < 0 at the current point.
    if (qa <= 0) {
      if (qb > 0) hi = std::min(hi, -qc / qb);
      if (qb < 0) lo = std::max(lo, -qc / qb);
      return;
    }
    const double disc = std::sqrt(std::max(0.0, qb * qb - 4 * qa * qc));
    const double r1 = qb >= 0 ? (-qb - disc) / (2 * qa) : (2 * qc) / (-qb + disc);
    const double r2 = qb >= 0 ? (2 * qc) / (-qb - disc) : (-qb + disc) / (2 * qa);
    lo = std::max(lo, std::min(r1, r2));
    hi = std::min(hi, std::max(r1, r2));
  };
  const double gf2 = problem.gamma_f * problem.gamma_f;
  clip(d.squaredNorm(), 2 * theta.dot(d), theta.squaredNorm() - gf2);
  const VectorXd e = problem.y - fm.design.transpose() * theta;
  const VectorXd delta = fm.design.transpose() * d;
  for (const auto& c : problem.noise.constraints()) {
    const VectorXd es = c.gather(e);
    const VectorXd ds = c.gather(delta);
    const VectorXd pd = c.block * ds;
    clip(ds.dot(pd), -2 * es.dot(pd), es.dot(c.block * es) - c.gamma * c.gamma);
  }
  return std::isfinite(lo) && std::isfinite(hi) && lo < hi;
}

FeasibleSample make_sample(const Problem<double>& problem, const FeatureModel& fm, const VectorXd& theta,
                           const VectorXd& margins) {
  return {theta, problem.y - fm.design.transpose() * theta, fm.test_block * theta, margins};
}

}  // namespace

std::vector<FeasibleSample> sample_feasible_function(const Problem<double>& problem, const FeatureModel& fm,
                                                     std::uint64_t seed, int count,
                                                     const std::optional<VectorXd>& start,
                                                     const SamplerOptions& opts) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Index r = fm.rank();
  std::vector<FeasibleSample> out;
  if (count <= 0) return out;

  VectorXd theta;
  if (start) {
    theta = *start;
    if (primal_margins(problem, fm, theta).minCoeff() <= 0) {
      throw std::invalid_argument("sampler: start point is not strictly feasible");
    }
  } else {
    // A loosely centred barrier point is strictly feasible.
    try {
      PrimalOptions loose;
      loose.tolerance = 0.5;
      VectorXd h = VectorXd::Zero(problem.output_dim());
      h(0) = 1.0;
      theta = solve_primal(problem, fm, h, loose).theta;
      if (theta.size() != r || primal_margins(problem, fm, theta).minCoeff() <= 0) theta.resize(0);
    } catch (const std::runtime_error&) {
      theta.resize(0);
    }
  }

  if (theta.size() == 0) {
    // Rejection fallback: uniform draws from the gamma_f ball.
    double best_margin = -std::numeric_limits<double>::infinity();
    Index worst = 0;
    for (int attempt = 0; attempt < opts.rejection_budget; ++attempt) {
      VectorXd cand(r);
      for (Index i = 0; i < r; ++i) cand(i) = normal(rng);
      const double radius = problem.gamma_f * std::pow(unit(rng), 1.0 / std::max<double>(1.0, static_cast<double>(r)));
      if (cand.norm() > 0) cand *= radius / cand.norm();
      const VectorXd m = primal_margins(problem, fm, cand);
      Index arg = 0;
      const double mm = m.minCoeff(&arg);
      if (mm > 0) {
        theta = cand;
        break;
      }
      if (mm > best_margin) {
        best_margin = mm;
        worst = arg;
      }
    }
    if (theta.size() == 0) {
      std::ostringstream msg;
      msg << "sampler: rejection budget exhausted; tightest violated constraint " << worst
          << " (0 = RKHS norm) with slack " << best_margin;
      throw NumericalError(msg.str());
    }
  }

  if (r == 0) {
    for (int k = 0; k < count; ++k) out.push_back(make_sample(problem, fm, theta, primal_margins(problem, fm, theta)));
    return out;
  }

  const int total = opts.burn_in + count * std::max(1, opts.thinning);
  int kept = 0;
  for (int step = 0; kept < count && step < total * 4; ++step) {
    VectorXd d(r);
    for (Index i = 0; i < r; ++i) d(i) = normal(rng);
    double lo = 0;
    double hi = 0;
    if (!chord(problem, fm, theta, d, lo, hi)) continue;
    const VectorXd cand = theta + (lo + (hi - lo) * unit(rng)) * d;
    const VectorXd m = primal_margins(problem, fm, cand);
    if (m.minCoeff() <= 0) continue;
    theta = cand;
    if (step >= opts.burn_in && (step - opts.burn_in) % std::max(1, opts.thinning) == 0) {
      out.push_back(make_sample(problem, fm, theta, m));
      ++kept;
    }
  }
  if (kept < count) throw NumericalError("sampler: hit-and-run failed to produce enough strictly feasible samples");
  return out;
}

}  // namespace rkhsbound
