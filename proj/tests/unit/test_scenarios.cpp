#include <doctest.h>

#include <random>

#include "rkhsbound/dual_bound.hpp"
#include "rkhsbound/scenarios.hpp"

using namespace rkhsbound;

TEST_SUITE("scenarios") {

TEST_CASE("single center expansion") {
  const auto k = Kernel<double>::squared_exponential(1, 0.8);
  const VectorXd c = VectorXd::Constant(1, 0.4);
  const auto f = random_rkhs_function(k, 0.6, {c}, 5);
  const double alpha = f.coefficients(0, 0);
  CHECK(alpha * alpha * k(c, c)(0, 0) == doctest::Approx(0.36).epsilon(1e-12));
  CHECK(f.norm == 0.6);
}

TEST_CASE("rescaled norm is exact") {
  const ScalarKernel<double> s = Periodic<double>{1.0, 6.283185307179586};
  const auto k = Kernel<double>::diagonal(1, {s, s});
  PointList<double> centers;
  for (int i = 0; i < 12; ++i) centers.push_back(VectorXd::Constant(1, 0.5 * i));
  const auto f = random_rkhs_function(k, 0.9, centers, 17);
  CHECK(std::abs(f.squared_norm() - 0.81) <= 1e-12);
}

TEST_CASE("function values match a direct expansion") {
  const auto k = Kernel<double>::squared_exponential(1, 1.1);
  PointList<double> centers;
  for (int i = 0; i < 5; ++i) centers.push_back(VectorXd::Constant(1, -2.0 + i));
  const auto f = random_rkhs_function(k, 0.5, centers, 3);
  for (int i = 0; i < 100; ++i) {
    const double x = -3 + 0.06 * i;
    double direct = 0;
    for (int c = 0; c < 5; ++c) direct += f.coefficients(0, c) * std::exp(-std::pow(x - centers[c](0), 2) / 1.21);
    CHECK(f(VectorXd::Constant(1, x))(0) == doctest::Approx(direct).epsilon(1e-13));
  }
}

TEST_CASE("random function input checks") {
  const auto k = Kernel<double>::squared_exponential(1);
  CHECK_THROWS_AS(random_rkhs_function(k, 0.5, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(random_rkhs_function(k, 0.0, {VectorXd::Zero(1)}, 1), std::invalid_argument);
}

TEST_CASE("illustrative scenario") {
  const auto s = gen_illustrative(0);
  const auto& p = s.problem;
  CHECK(p.size() == 2);
  CHECK(p.gamma_f == 1.0);
  REQUIRE(p.noise.num_constraints() == 2);
  CHECK(p.noise.kind() == NoiseKind::Pointwise);
  CHECK(p.noise.gammas().isApproxToConstant(0.2));
  CHECK(s.grid[static_cast<std::size_t>(s.anchor)] == kIllustrativeAnchor);
  CHECK(s.grid.front() == doctest::Approx(-3.0));
  CHECK(s.grid.back() == doctest::Approx(3.0));
  CHECK(s.truth.squared_norm() < 1.0);
  CHECK(p.noise.contains(s.noise));
  CHECK((p.y - measured_values(p, s.truth) - s.noise).norm() < 1e-15);
}

TEST_CASE("illustrative truth lies inside the optimal envelope") {
  const auto s = gen_illustrative(0);
  const VectorXd h = VectorXd::Ones(1);
  for (std::size_t i = 0; i < s.grid.size(); i += 12) {
    const VectorXd x = VectorXd::Constant(1, s.grid[i]);
    const auto iv = two_sided_interval(s.problem, x, h);
    const double f = s.truth(x)(0);
    CHECK(f <= iv.upper + 1e-8);
    CHECK(f >= iv.lower - 1e-8);
  }
}

TEST_CASE("generators are deterministic") {
  const auto a = gen_illustrative(7), b = gen_illustrative(7);
  CHECK(a.problem.y == b.problem.y);
  QuadrotorConfig c;
  c.n_data = 10;
  c.seed = 4;
  const auto q1 = gen_quadrotor(c), q2 = gen_quadrotor(c);
  CHECK(q1.problem.y == q2.problem.y);
  CHECK(q1.tilt == q2.tilt);
  c.seed = 5;
  CHECK(gen_quadrotor(c).problem.y != q1.problem.y);
}

TEST_CASE("quadrotor structure") {
  QuadrotorConfig c;
  c.n_data = 10;
  const auto s = gen_quadrotor(c);
  const auto& p = s.problem;
  CHECK(p.size() == 20);
  CHECK(p.output_dim() == 2);
  CHECK(p.noise.num_constraints() == 10);
  CHECK(p.gamma_f == 1.0);
  for (Index j = 0; j < 10; ++j) {
    CHECK(p.measurements.col(2 * j) == VectorXd::Unit(2, 0));
    CHECK(p.measurements.col(2 * j + 1) == VectorXd::Unit(2, 1));
    const MatrixXd d = p.noise.dense(j);
    const auto es = symmetric_eigen<double>(d, false);
    CHECK((es.values.array() > 1e-9).count() == 2);
    MatrixXd outside = d;
    outside.block(2 * j, 2 * j, 2, 2).setZero();
    CHECK(outside.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(p.noise.contains(s.noise));
  CHECK(s.truth.norm == doctest::Approx(0.9));
  CHECK_THROWS_AS(QuadrotorConfig{0}.validate(), std::invalid_argument);
}

TEST_CASE("wind draws satisfy the rotated constraints") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  const double a = 0.3, b = 0.1;
  for (int k = 0; k < 1000; ++k) {
    const double theta = 6.283185307179586 * u(rng);
    const double rad = std::sqrt(u(rng)) * 0.9999, phi = 6.283185307179586 * u(rng);
    const Eigen::Vector2d wg(a * rad * std::cos(phi), b * rad * std::sin(phi));
    Eigen::Matrix2d r;
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    const Eigen::Vector2d wb = r.transpose() * wg;
    CHECK(wb.dot(wind_form(theta, a, b) * wb) < 1.0);
  }
}

TEST_CASE("point-wise covering bound is the larger semi-axis") {
  double widest = 0;
  for (int i = 0; i < 3600; ++i) {
    const Eigen::Matrix2d cov = wind_form(6.283185307179586 * i / 3600, 0.3, 0.1).inverse();
    const double cover = std::sqrt(std::max(cov(0, 0), cov(1, 1)));
    CHECK(cover <= 0.3 + 1e-12);
    widest = std::max(widest, cover);
  }
  CHECK(widest == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("point-wise variants") {
  QuadrotorConfig c;
  c.n_data = 6;
  const auto s = gen_quadrotor(c);
  const auto pv = pointwise_variant(s, 1);
  CHECK(pv.size() == 6);
  CHECK(pv.noise.gammas().isApproxToConstant(0.3));
  for (Index k = 0; k < 6; ++k) CHECK(pv.y(k) == s.problem.y(2 * k + 1));
  CHECK(pv.noise.contains(s.noise(Eigen::seq(1, 11, 2)).eval()));
  const auto pc = pointwise_conversion(s.problem, 0.3);
  CHECK(pc.size() == 12);
  CHECK(pc.noise.contains(s.noise));
  CHECK_THROWS_AS(pointwise_variant(s, 2), std::invalid_argument);
}

}
