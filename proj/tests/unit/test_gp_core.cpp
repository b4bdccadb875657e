#include <doctest.h>

#include <random>

#include "rkhsbound/gp_core.hpp"
#include "support/instances.hpp"

using namespace rkhsbound;

namespace {

Problem<double> scalar_problem(const std::vector<double>& xs, const std::vector<double>& ys, double bound) {
  Problem<double> p;
  p.kernel = Kernel<double>::squared_exponential(1);
  for (double x : xs) p.inputs.push_back(VectorXd::Constant(1, x));
  p.measurements = MatrixXd::Ones(1, static_cast<Index>(xs.size()));
  p.y = Eigen::Map<const VectorXd>(ys.data(), static_cast<Index>(ys.size()));
  p.noise = pointwise_noise<double>(VectorXd::Constant(static_cast<Index>(xs.size()), bound));
  p.gamma_f = 1.0;
  return p;
}

// Dense-solve reference for the data fit, posterior and scaling factor.
struct DenseOracle {
  MatrixXd khat;
  double data_fit{0};
  double beta_sq{0};
  VectorXd mean;
  MatrixXd cov;

  DenseOracle(const Problem<double>& p, const VectorXd& sigma, const VectorXd& x) {
    const MatrixXd g = projected_gram(p);
    const auto s = build_Kw_sigma(p.noise, sigma);
    khat = g + s.covariance;
    const Eigen::FullPivLU<MatrixXd> lu(khat);
    data_fit = p.y.dot(lu.solve(p.y));
    double budget = p.gamma_f * p.gamma_f;
    for (Index j = 0; j < sigma.size(); ++j) budget += std::pow(p.noise.constraint(j).gamma / sigma(j), 2);
    beta_sq = budget - data_fit;
    const MatrixXd b = projected_cross(p.kernel, x, p.inputs, p.measurements);
    mean = b * lu.solve(p.y);
    cov = p.kernel(x, x) - b * lu.solve(MatrixXd(b.transpose()));
  }
};

}  // namespace

TEST_SUITE("gp_core") {

TEST_CASE("empty data gives the prior") {
  Problem<double> p = scalar_problem({}, {}, 0.1);
  const auto fact = factorize(p, VectorXd(0));
  CHECK(fact.size() == 0);
  const VectorXd x = VectorXd::Constant(1, 0.3);
  const auto post = posterior(fact, p, x);
  CHECK(post.mean(0) == 0.0);
  CHECK(post.covariance(0, 0) == doctest::Approx(1.0));
  CHECK(beta_sigma(fact) == doctest::Approx(1.0));
}

TEST_CASE("single scalar measurement") {
  const Problem<double> p = scalar_problem({0.5}, {0.8}, 0.3);
  const double sigma = 0.7;
  const auto fact = factorize(p, VectorXd(VectorXd::Constant(1, sigma)));
  CHECK(fact.data_fit() == doctest::Approx(0.64 / (1 + sigma * sigma)).epsilon(1e-13));
  const VectorXd x = VectorXd::Constant(1, -0.4);
  const double kx = std::exp(-0.81);
  const auto post = posterior(fact, p, x);
  CHECK(post.mean(0) == doctest::Approx(kx * 0.8 / (1 + sigma * sigma)).epsilon(1e-13));
  CHECK(post.covariance(0, 0) == doctest::Approx(1 - kx * kx / (1 + sigma * sigma)).epsilon(1e-13));
}

TEST_CASE("antisymmetric data about the test point") {
  const Problem<double> p = scalar_problem({-0.7, 1.3}, {0.4, -0.4}, 0.2);
  const auto fact = factorize(p, VectorXd(VectorXd::Constant(2, 0.5)));
  CHECK(std::abs(posterior(fact, p, VectorXd(VectorXd::Constant(1, 0.3))).mean(0)) < 1e-15);
}

TEST_CASE("zero data gives the full budget") {
  const Problem<double> p = scalar_problem({-1.0, 0.0, 1.0}, {0.0, 0.0, 0.0}, 0.2);
  const VectorXd sigma = (VectorXd(3) << 0.1, 0.5, 2.0).finished();
  const auto fact = factorize(p, sigma);
  const double expected = std::sqrt(1 + 0.04 * (100 + 4 + 0.25));
  CHECK(beta_sigma(fact) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("negative radicand is infeasible") {
  // y^2 > (gamma_f^2 + gamma^2 / sigma^2)(k11 + sigma^2)
  const Problem<double> p = scalar_problem({0.0}, {3.0}, 0.2);
  const auto fact = factorize(p, VectorXd(VectorXd::Constant(1, 1.0)));
  CHECK(fact.beta_squared() < 0);
  CHECK_THROWS_AS(beta_sigma(fact), InfeasibleError);
}

TEST_CASE("factorization agrees with dense solves") {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 20; ++k) {
    testing::InstanceSpec spec;
    spec.max_n = 6;
    const auto inst = testing::random_instance(rng, spec);
    const auto& p = inst.problem;
    const VectorXd sigma = testing::random_sigma(rng, p.noise, 1.0);
    const DenseOracle oracle(p, sigma, inst.query.x);
    const auto fact = factorize(p, sigma);
    const auto post = posterior(fact, p, inst.query.x);
    CHECK(std::abs(fact.data_fit() - oracle.data_fit) <= 1e-10 * std::max(1.0, oracle.data_fit));
    CHECK(std::abs(fact.beta_squared() - oracle.beta_sq) <= 1e-10 * std::max(1.0, fact.budget()));
    CHECK((post.mean - oracle.mean).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((post.covariance - oracle.cov).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("capped components drop their constraint") {
  const Problem<double> p = scalar_problem({-1.0, 1.0}, {0.3, 0.1}, 0.2);
  const VectorXd sigma = (VectorXd(2) << 0.4, kDefaultSigmaCap).finished();
  const auto fact = factorize(p, sigma);
  CHECK(fact.capped(1));
  const Problem<double> one = scalar_problem({-1.0}, {0.3}, 0.2);
  const auto ref = factorize(one, VectorXd(VectorXd::Constant(1, 0.4)));
  const VectorXd x = VectorXd::Constant(1, 0.2);
  CHECK(fact.data_fit() == doctest::Approx(ref.data_fit()).epsilon(1e-12));
  CHECK(posterior(fact, p, x).mean(0) == doctest::Approx(posterior(ref, one, x).mean(0)).epsilon(1e-12));
}

TEST_CASE("problem validation") {
  Problem<double> p = scalar_problem({0.0, 1.0}, {0.1, 0.2}, 0.1);
  p.y.resize(1);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = scalar_problem({0.0}, {0.1}, 0.1);
  p.gamma_f = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

}
