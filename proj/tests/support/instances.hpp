#pragma once

// Random small feasible problems for property tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rkhsbound/dual_bound.hpp"
#include "rkhsbound/gp_core.hpp"
#include "rkhsbound/scenarios.hpp"

namespace rkhsbound::testing {

enum class NoiseChoice { Pointwise, Energy, General, Any };

struct InstanceSpec {
  int max_n{8};
  int max_constraints{4};
  int max_outputs{2};
  NoiseChoice noise{NoiseChoice::Any};
  bool uniform_pointwise{false};  // equal bounds for all measurements
};

struct Instance {
  Problem<double> problem;
  BoundQuery<double> query;
  RandomRkhsFunction truth;
  VectorXd noise;
};

inline double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int a, int b) {
  return std::uniform_int_distribution<int>(a, b)(rng);
}

inline VectorXd random_point(std::mt19937_64& rng, Index dim, double lo, double hi) {
  VectorXd x(dim);
  for (Index d = 0; d < dim; ++d) x(d) = uniform(rng, lo, hi);
  return x;
}

inline MatrixXd random_psd(std::mt19937_64& rng, Index n, Index rank) {
  std::normal_distribution<double> g;
  MatrixXd f(n, rank);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < rank; ++j) f(i, j) = g(rng);
  return f * f.transpose() / static_cast<double>(rank);
}

inline Kernel<double> random_kernel(std::mt19937_64& rng, Index outputs) {
  if (outputs == 1) {
    const int pick = uniform_int(rng, 0, 2);
    if (pick == 0) return Kernel<double>::squared_exponential(1, uniform(rng, 0.5, 2.0));
    if (pick == 1) return Kernel<double>::squared_exponential(2, uniform(rng, 0.7, 2.0));
    return Kernel<double>::periodic(1, uniform(rng, 0.7, 1.5), 6.283185307179586);
  }
  if (uniform_int(rng, 0, 3) == 0) return Kernel<double>::features(1, polynomial_features<double>(1, outputs, 2));
  const ScalarKernel<double> a = SquaredExponential<double>{uniform(rng, 0.5, 2.0)};
  const ScalarKernel<double> b = Periodic<double>{uniform(rng, 0.7, 1.5), 6.283185307179586};
  return Kernel<double>::diagonal(1, {a, b});
}

/// Noise model over n measurements with at most `max_constraints` constraints.
inline NoiseModel<double> random_noise(std::mt19937_64& rng, Index n, const InstanceSpec& spec) {
  NoiseChoice choice = spec.noise;
  if (choice == NoiseChoice::Any) {
    const int pick = uniform_int(rng, 0, 2);
    choice = pick == 0 ? NoiseChoice::Pointwise : (pick == 1 ? NoiseChoice::Energy : NoiseChoice::General);
  }
  if (choice == NoiseChoice::Pointwise && n > spec.max_constraints) choice = NoiseChoice::General;
  if (choice == NoiseChoice::General && spec.max_constraints < 2) choice = NoiseChoice::Energy;
  if (choice == NoiseChoice::Pointwise) {
    VectorXd b(n);
    const double common = uniform(rng, 0.05, 0.4);
    for (Index i = 0; i < n; ++i) b(i) = spec.uniform_pointwise ? common : uniform(rng, 0.05, 0.4);
    return NoiseModel<double>::pointwise(b);
  }
  if (choice == NoiseChoice::Energy) {
    MatrixXd p = random_psd(rng, n, n + 1);
    p.diagonal().array() += 0.2;
    return NoiseModel<double>::energy(p, uniform(rng, 0.1, 0.6));
  }
  // Split the measurements into groups, one constraint per group, plus an
  // optional overlapping constraint on all of them.
  const int groups = std::min<int>(uniform_int(rng, 1, spec.max_constraints - 1), static_cast<int>(n));
  std::vector<NoiseConstraint<double>> cons(static_cast<std::size_t>(groups));
  for (Index i = 0; i < n; ++i) {
    const int g = i < groups ? static_cast<int>(i) : uniform_int(rng, 0, groups - 1);
    cons[static_cast<std::size_t>(g)].support.push_back(i);
  }
  for (auto& c : cons) {
    const Index m = static_cast<Index>(c.support.size());
    c.block = random_psd(rng, m, m + 1);
    c.block.diagonal().array() += 0.2;
    c.gamma = uniform(rng, 0.1, 0.5);
  }
  if (uniform_int(rng, 0, 1) == 1 || groups == 1) {
    NoiseConstraint<double> all;
    for (Index i = 0; i < n; ++i) all.support.push_back(i);
    all.block = random_psd(rng, n, uniform_int(rng, 1, static_cast<int>(n)));
    all.gamma = uniform(rng, 0.2, 0.8);
    cons.push_back(std::move(all));
  }
  return NoiseModel<double>::from_blocks(n, std::move(cons));
}

/// Noise realization strictly inside every constraint (largest ratio = level).
inline VectorXd feasible_noise(std::mt19937_64& rng, const NoiseModel<double>& noise, double level) {
  std::normal_distribution<double> g;
  VectorXd w(noise.size());
  for (Index i = 0; i < w.size(); ++i) w(i) = g(rng);
  double worst = 0;
  for (Index j = 0; j < noise.num_constraints(); ++j) {
    const auto& c = noise.constraint(j);
    worst = std::max(worst, std::sqrt(c.quadratic(w)) / c.gamma);
  }
  return worst > 0 ? VectorXd(w * (level / worst)) : w;
}

inline Instance random_instance(std::mt19937_64& rng, const InstanceSpec& spec = {}) {
  Instance inst;
  const Index nf = uniform_int(rng, 1, spec.max_outputs);
  const Index n = uniform_int(rng, 1, spec.max_n);
  auto& p = inst.problem;
  p.kernel = random_kernel(rng, nf);
  p.gamma_f = uniform(rng, 0.5, 2.0);
  const Index dim = p.kernel.input_dim();
  p.measurements.resize(nf, n);
  for (Index i = 0; i < n; ++i) {
    p.inputs.push_back(random_point(rng, dim, -2.0, 2.0));
    VectorXd c = random_point(rng, nf, -1.0, 1.0);
    if (c.norm() < 0.2) c(0) += 1.0;
    p.measurements.col(i) = nf == 1 ? VectorXd::Ones(1) : VectorXd(c / c.norm());
  }
  p.noise = random_noise(rng, n, spec);
  PointList<double> centers;
  const int nc = uniform_int(rng, 2, 5);
  for (int c = 0; c < nc; ++c) centers.push_back(random_point(rng, dim, -2.5, 2.5));
  inst.truth = random_rkhs_function(p.kernel, uniform(rng, 0.3, 0.9) * p.gamma_f, centers, rng());
  inst.noise = feasible_noise(rng, p.noise, uniform(rng, 0.2, 0.9));
  p.y = measured_values(p, inst.truth) + inst.noise;
  VectorXd h = random_point(rng, nf, -1.0, 1.0);
  if (h.norm() < 0.1) h(0) = 1.0;
  inst.query = {random_point(rng, dim, -2.5, 2.5), h / h.norm()};
  return inst;
}

/// Log-uniform noise parameters around the natural scale of each constraint.
inline VectorXd random_sigma(std::mt19937_64& rng, const NoiseModel<double>& noise, double decades = 2.0) {
  const VectorXd base = noise.default_sigma();
  VectorXd s(base.size());
  for (Index j = 0; j < s.size(); ++j) s(j) = base(j) * std::pow(10.0, uniform(rng, -decades, decades));
  return s;
}

}  // namespace rkhsbound::testing
