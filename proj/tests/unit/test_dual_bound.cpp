#include <doctest.h>

#include <random>

#include "rkhsbound/dual_bound.hpp"
#include "rkhsbound/oracle.hpp"
#include "support/instances.hpp"

using namespace rkhsbound;

namespace {

Problem<double> empty_problem(Index nf) {
  Problem<double> p;
  if (nf == 1) {
    p.kernel = Kernel<double>::squared_exponential(1);
  } else {
    const ScalarKernel<double> s = SquaredExponential<double>{1.0};
    p.kernel = Kernel<double>::diagonal(1, std::vector<ScalarKernel<double>>(static_cast<std::size_t>(nf), s));
  }
  p.measurements.resize(nf, 0);
  p.y.resize(0);
  p.noise = pointwise_noise<double>(VectorXd(0));
  p.gamma_f = 1.7;
  return p;
}

Problem<double> two_point_problem() {
  Problem<double> p;
  p.kernel = Kernel<double>::squared_exponential(1);
  p.inputs = {VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 0.5)};
  p.measurements = MatrixXd::Ones(1, 2);
  p.y = (VectorXd(2) << 0.3, -0.2).finished();
  p.noise = pointwise_noise<double>(VectorXd::Constant(2, 0.2));
  p.gamma_f = 1.0;
  return p;
}

}  // namespace

TEST_SUITE("dual_bound") {

TEST_CASE("no data gives the prior bound") {
  const auto p = empty_problem(2);
  const BoundQuery<double> q{VectorXd::Constant(1, 0.1), (VectorXd(2) << 0.6, 0.8).finished()};
  CHECK(dual_value(p, q, VectorXd(0)) == doctest::Approx(1.7));
  const auto cert = optimize_bound(p, q);
  CHECK(cert.value == doctest::Approx(1.7));
  CHECK(cert.iterations == 0);
  const auto iv = two_sided_interval(p, q.x, q.h);
  CHECK(iv.lower == doctest::Approx(-1.7));
  CHECK(iv.upper == doctest::Approx(1.7));
  const auto e = ellipsoid_bound(p, q.x, VectorXd(0));
  CHECK(e.beta == doctest::Approx(1.7));
  CHECK((e.covariance - MatrixXd::Identity(2, 2)).norm() < 1e-15);
}

TEST_CASE("dataless gradient in closed form") {
  // Noise terms present but no data coupling: beta = sqrt(gamma_f^2 + sum gamma_j^2 / sigma_j^2),
  // so the value is beta * sqrt(h^T k h) with every data weight zero.
  Problem<double> p = two_point_problem();
  p.y.setZero();
  p.inputs = {VectorXd::Constant(1, -40.0), VectorXd::Constant(1, 40.0)};
  const BoundQuery<double> q{VectorXd::Constant(1, 0.0), VectorXd::Ones(1)};
  const VectorXd sigma = (VectorXd(2) << 0.3, 0.9).finished();
  const auto ev = DualObjective<double>(p, q).evaluate(sigma);
  const double beta = std::sqrt(1 + 0.04 / 0.09 + 0.04 / 0.81);
  CHECK(ev.value == doctest::Approx(beta).epsilon(1e-12));
  for (Index j = 0; j < 2; ++j) {
    const double expected = -0.04 / std::pow(sigma(j), 3) / beta;
    CHECK(ev.gradient(j) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("all sigma at the cap recovers the prior bound") {
  const auto p = two_point_problem();
  const BoundQuery<double> q{VectorXd::Constant(1, 0.2), VectorXd::Ones(1)};
  CHECK(dual_value(p, q, VectorXd(VectorXd::Constant(2, kDefaultSigmaCap))) == doctest::Approx(1.0).epsilon(1e-12));
  const double near = dual_value(p, q, VectorXd(VectorXd::Constant(2, 1e6)));
  CHECK(std::abs(near - 1.0) < 1e-5);
}

TEST_CASE("single measurement agrees with the feature-space closed form") {
  Problem<double> p = two_point_problem();
  p.inputs.resize(1);
  p.measurements = MatrixXd::Ones(1, 1);
  p.y = VectorXd::Constant(1, 0.25);
  p.noise = pointwise_noise<double>(VectorXd::Constant(1, 0.2));
  const BoundQuery<double> q{VectorXd::Constant(1, 0.4), VectorXd::Ones(1)};
  for (double s : {0.05, 0.3, 2.0}) {
    const VectorXd sigma = VectorXd::Constant(1, s);
    CHECK(dual_value(p, q, sigma) == doctest::Approx(relaxed_closed_form(p, q, sigma)).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches central differences") {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 20; ++k) {
    const auto inst = testing::random_instance(rng);
    const DualObjective<double> obj(inst.problem, inst.query);
    const VectorXd sigma = testing::random_sigma(rng, inst.problem.noise, 1.0);
    const auto ev = obj.evaluate(sigma);
    for (Index j = 0; j < sigma.size(); ++j) {
      const double step = 1e-6 * sigma(j);
      VectorXd up = sigma, down = sigma;
      up(j) += step;
      down(j) -= step;
      const double fd = (obj.evaluate(up, false).value - obj.evaluate(down, false).value) / (2 * step);
      CHECK(std::abs(ev.gradient(j) - fd) <= 1e-4 * std::max(std::abs(fd), 1e-6 * ev.value / sigma(j)));
      CHECK(ev.log_gradient(j) == doctest::Approx(ev.gradient(j) * sigma(j)));
    }
  }
}

TEST_CASE("gradient vanishes at a grid-search minimum") {
  // One energy constraint: the dual is a function of a single sigma.
  std::mt19937_64 rng(32);
  testing::InstanceSpec spec;
  spec.noise = testing::NoiseChoice::Energy;
  int interior = 0;
  for (int k = 0; k < 10; ++k) {
    const auto inst = testing::random_instance(rng, spec);
    const DualObjective<double> obj(inst.problem, inst.query);
    double lo = std::log(1e-6), hi = std::log(1e6);
    for (int it = 0; it < 200; ++it) {
      const double a = lo + (hi - lo) / 3, b = hi - (hi - lo) / 3;
      const double fa = obj.evaluate(VectorXd::Constant(1, std::exp(a)), false).value;
      const double fb = obj.evaluate(VectorXd::Constant(1, std::exp(b)), false).value;
      (fa < fb ? hi : lo) = fa < fb ? b : a;
    }
    const double s = std::exp(0.5 * (lo + hi));
    if (s > 1e5) continue;
    ++interior;
    const auto ev = obj.evaluate(VectorXd::Constant(1, s));
    CHECK(std::abs(ev.log_gradient(0)) <= 1e-5 * std::abs(ev.value));
  }
  CHECK(interior > 0);
}

TEST_CASE("optimized bound matches the primal optimum") {
  std::mt19937_64 rng(33);
  testing::InstanceSpec spec;
  spec.max_n = 6;
  spec.max_constraints = 3;
  for (int k = 0; k < 15; ++k) {
    const auto inst = testing::random_instance(rng, spec);
    const auto cert = optimize_bound(inst.problem, inst.query, OptimizerOptions<double>::tight());
    const auto sol = solve_primal(inst.problem, inst.query);
    CHECK(cert.value == doctest::Approx(sol.value).epsilon(1e-5));
    CHECK(cert.value <= cert.initial_value + 1e-12);
    CHECK((cert.sigma.array() > 0).all());
  }
}

TEST_CASE("ellipsoid support equals the dual value") {
  std::mt19937_64 rng(34);
  for (int k = 0; k < 20; ++k) {
    const auto inst = testing::random_instance(rng);
    const VectorXd sigma = testing::random_sigma(rng, inst.problem.noise, 1.0);
    EllipsoidBound<double> e;
    try {
      e = ellipsoid_bound(inst.problem, inst.query.x, sigma);
    } catch (const SingularCovarianceError&) {
      continue;
    }
    for (int d = 0; d < 3; ++d) {
      const VectorXd h = testing::random_point(rng, inst.problem.output_dim(), -1, 1);
      CHECK(e.support(h) == doctest::Approx(dual_value(inst.problem, {inst.query.x, h}, sigma)).epsilon(1e-12));
    }
  }
}

TEST_CASE("two-sided interval is positively homogeneous") {
  const auto p = two_point_problem();
  const VectorXd x = VectorXd::Constant(1, 1.5);
  const VectorXd one = VectorXd::Ones(1);
  const VectorXd two = VectorXd::Constant(1, 2.0);
  for (const double s : {0.05, 0.3, 2.0}) {
    const VectorXd sigma = VectorXd::Constant(p.noise.num_constraints(), s);
    CHECK(dual_value(p, {x, two}, sigma) == doctest::Approx(2 * dual_value(p, {x, one}, sigma)).epsilon(1e-12));
  }
  const auto tight = OptimizerOptions<double>::tight();
  const auto a = two_sided_interval(p, x, one, tight);
  const auto b = two_sided_interval(p, x, two, tight);
  CHECK(b.lower == doctest::Approx(2 * a.lower).epsilon(1e-9));
  CHECK(b.upper == doctest::Approx(2 * a.upper).epsilon(1e-9));
  CHECK(a.lower < a.upper);
}

TEST_CASE("optimizer options are validated") {
  const auto p = two_point_problem();
  const BoundQuery<double> q{VectorXd::Constant(1, 0.0), VectorXd::Ones(1)};
  OptimizerOptions<double> o;
  o.learning_rate = 0;
  CHECK_THROWS_AS(optimize_bound(p, q, o), std::invalid_argument);
  o = {};
  o.initial_sigma = VectorXd::Ones(3);
  CHECK_THROWS_AS(optimize_bound(p, q, o), std::invalid_argument);
  CHECK_THROWS_AS(dual_value(p, {q.x, VectorXd::Ones(2)}, VectorXd(VectorXd::Ones(2))), std::invalid_argument);
}

TEST_CASE("infeasible data raise") {
  Problem<double> p = two_point_problem();
  p.y << 5.0, -5.0;
  const BoundQuery<double> q{VectorXd::Constant(1, 0.0), VectorXd::Ones(1)};
  CHECK_THROWS_AS(dual_value(p, q, VectorXd(VectorXd::Constant(2, 0.2))), InfeasibleError);
}

TEST_CASE("long double evaluation agrees with double") {
  const auto p = two_point_problem();
  Problem<long double> pl;
  pl.kernel = Kernel<long double>::squared_exponential(1);
  for (const auto& x : p.inputs) pl.inputs.push_back(x.cast<long double>());
  pl.measurements = p.measurements.cast<long double>();
  pl.y = p.y.cast<long double>();
  pl.noise = pointwise_noise<long double>(Vec<long double>::Constant(2, 0.2L));
  pl.gamma_f = 1.0L;
  const VectorXd sigma = (VectorXd(2) << 0.3, 0.6).finished();
  const BoundQuery<long double> ql{Vec<long double>::Constant(1, 0.7L), Vec<long double>::Ones(1)};
  const double vl = static_cast<double>(dual_value(pl, ql, Vec<long double>(sigma.cast<long double>())));
  const double vd = dual_value(p, {VectorXd::Constant(1, 0.7), VectorXd::Ones(1)}, sigma);
  CHECK(vl == doctest::Approx(vd).epsilon(1e-13));
}

}
