#include <doctest.h>

#include <random>

#include "rkhsbound/noise_model.hpp"

using namespace rkhsbound;

namespace {

MatrixXd random_pd(std::mt19937_64& rng, Index n, Index rank, double shift) {
  std::normal_distribution<double> g;
  MatrixXd f(n, rank);
  for (Index i = 0; i < f.size(); ++i) f(i) = g(rng);
  MatrixXd p = f * f.transpose();
  p.diagonal().array() += shift;
  return p;
}

}  // namespace

TEST_SUITE("noise_model") {

TEST_CASE("pointwise bounds give rank-one constraints") {
  const auto nm = pointwise_noise<double>((VectorXd(2) << 0.2, 0.2).finished());
  CHECK(nm.kind() == NoiseKind::Pointwise);
  REQUIRE(nm.num_constraints() == 2);
  for (Index j = 0; j < 2; ++j) {
    const MatrixXd p = nm.dense(j);
    CHECK(p(j, j) == 1.0);
    CHECK(p.sum() == 1.0);
    CHECK(nm.constraint(j).gamma == doctest::Approx(0.2));
  }
  CHECK(nm.contains((VectorXd(2) << 0.19, -0.19).finished()));
  CHECK_FALSE(nm.contains((VectorXd(2) << 0.21, 0.0).finished()));
  CHECK_FALSE(nm.contains((VectorXd(2) << 0.2, 0.0).finished()));
}

TEST_CASE("single unit bound") {
  const auto nm = pointwise_noise<double>(VectorXd::Ones(1));
  CHECK(nm.margins(VectorXd::Constant(1, 0.5))(0) == doctest::Approx(0.75));
}

TEST_CASE("pointwise sum of constraints is the identity") {
  const auto nm = pointwise_noise<double>(VectorXd::Constant(4, 0.3));
  CHECK(nm.weighted_sum(VectorXd::Ones(4)) == MatrixXd::Identity(4, 4));
}

TEST_CASE("pointwise rejects non-positive bounds") {
  CHECK_THROWS_AS(pointwise_noise<double>((VectorXd(2) << 0.2, 0.0).finished()), std::invalid_argument);
}

TEST_CASE("energy ball and scaling") {
  const auto unit = energy_noise<double>(MatrixXd::Identity(3, 3), 1.0);
  CHECK(unit.contains(VectorXd::Constant(3, 0.57)));
  CHECK_FALSE(unit.contains(VectorXd::Constant(3, 0.58)));
  const auto half = energy_noise<double>(MatrixXd(2 * MatrixXd::Identity(3, 3)), 1.0);
  const VectorXd e = VectorXd::Unit(3, 1);
  CHECK(half.contains(0.999 / std::sqrt(2.0) * e));
  CHECK_FALSE(half.contains(1.001 / std::sqrt(2.0) * e));
}

TEST_CASE("energy membership matches the explicit quadratic form") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const MatrixXd p = random_pd(rng, 5, 5, 0.1);
  const auto nm = energy_noise<double>(p, 1.5);
  for (int k = 0; k < 200; ++k) {
    VectorXd w(5);
    for (Index i = 0; i < 5; ++i) w(i) = 0.3 * g(rng);
    CHECK(nm.contains(w) == (w.dot(p * w) < 2.25));
  }
}

TEST_CASE("energy requires a positive definite matrix") {
  MatrixXd p = MatrixXd::Identity(3, 3);
  p(2, 2) = 0;
  CHECK_THROWS_AS(energy_noise<double>(p, 1.0), std::invalid_argument);
}

TEST_CASE("general model requires a positive definite sum") {
  MatrixXd p = MatrixXd::Zero(3, 3);
  p(0, 0) = 1;
  CHECK_THROWS_AS(NoiseModel<double>::general(3, {{p, 1.0}}), std::invalid_argument);
  MatrixXd indefinite = MatrixXd::Identity(3, 3);
  indefinite(1, 1) = -1;
  CHECK_THROWS_AS(NoiseModel<double>::general(3, {{indefinite, 1.0}}), std::invalid_argument);
}

TEST_CASE("surrogate covariance for pointwise noise") {
  const auto nm = pointwise_noise<double>((VectorXd(3) << 0.1, 0.2, 0.3).finished());
  const VectorXd sigma = (VectorXd(3) << 0.5, 2.0, 3.0).finished();
  const auto s = build_Kw_sigma(nm, sigma);
  CHECK((s.covariance - MatrixXd(sigma.cwiseAbs2().asDiagonal())).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("surrogate covariance for energy noise") {
  std::mt19937_64 rng(6);
  const MatrixXd p = random_pd(rng, 4, 4, 0.2);
  const auto nm = energy_noise<double>(p, 0.7);
  const auto s = build_Kw_sigma(nm, VectorXd(VectorXd::Constant(1, 1.7)));
  const MatrixXd oracle = 1.7 * 1.7 * p.inverse();
  CHECK((s.covariance - oracle).cwiseAbs().maxCoeff() <= 1e-10 * oracle.cwiseAbs().maxCoeff());
}

TEST_CASE("surrogate covariance for overlapping constraints") {
  std::mt19937_64 rng(7);
  const MatrixXd p1 = random_pd(rng, 5, 3, 0.0);
  const MatrixXd p2 = random_pd(rng, 5, 3, 0.0);
  const auto nm = NoiseModel<double>::general(5, {{p1, 0.4}, {p2, 0.9}});
  const VectorXd sigma = (VectorXd(2) << 0.6, 1.9).finished();
  const auto s = build_Kw_sigma(nm, sigma);
  const MatrixXd precision = p1 / (0.36) + p2 / (1.9 * 1.9);
  const MatrixXd oracle = precision.inverse();
  CHECK((s.precision - precision).cwiseAbs().maxCoeff() <= 1e-12 * precision.cwiseAbs().maxCoeff());
  CHECK((s.covariance - oracle).cwiseAbs().maxCoeff() <= 1e-10 * oracle.cwiseAbs().maxCoeff());
}

TEST_CASE("blocks on a support embed into the full matrix") {
  NoiseConstraint<double> c;
  c.support = {1, 3};
  c.block = (MatrixXd(2, 2) << 2.0, 0.5, 0.5, 1.0).finished();
  c.gamma = 0.3;
  NoiseConstraint<double> d;
  d.support = {0, 1, 2, 3};
  d.block = MatrixXd::Identity(4, 4);
  d.gamma = 1.0;
  const auto nm = NoiseModel<double>::from_blocks(4, {c, d});
  const MatrixXd p = nm.dense(0);
  CHECK(p(1, 1) == 2.0);
  CHECK(p(3, 1) == 0.5);
  CHECK(p.row(0).norm() == 0.0);
  CHECK(p.row(2).norm() == 0.0);
  const VectorXd w = (VectorXd(4) << 9.0, 0.1, 9.0, -0.2).finished();
  CHECK(nm.constraint(0).quadratic(w) == doctest::Approx(w.dot(p * w)));
}

TEST_CASE("capped sigma has zero weight") {
  const VectorXd t = noise_weights<double>((VectorXd(2) << 2.0, kDefaultSigmaCap).finished());
  CHECK(t(0) == doctest::Approx(0.25));
  CHECK(t(1) == 0.0);
  CHECK_THROWS_AS(noise_weights<double>(VectorXd::Zero(1)), std::invalid_argument);
}

}
