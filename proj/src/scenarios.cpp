#include "rkhsbound/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "rkhsbound/errors.hpp"

namespace rkhsbound {

VectorXd RandomRkhsFunction::operator()(const VectorXd& x) const {
  VectorXd out = VectorXd::Zero(kernel.output_dim());
  for (std::size_t c = 0; c < centers.size(); ++c) {
    out += kernel(x, centers[c]) * coefficients.col(static_cast<Index>(c));
  }
  return out;
}

double RandomRkhsFunction::squared_norm() const {
  const MatrixXd kcc = kernel_matrix(kernel, centers);
  const VectorXd a = coefficients.reshaped();
  return a.dot(kcc * a);
}

RandomRkhsFunction random_rkhs_function(const Kernel<double>& kernel, double gamma_target,
                                        const PointList<double>& centers, std::uint64_t seed) {
  if (!(gamma_target > 0)) throw std::invalid_argument("random_rkhs_function: target norm must be positive");
  if (centers.empty()) throw std::invalid_argument("random_rkhs_function: need at least one center");
  const Index nf = kernel.output_dim();
  const Index m = static_cast<Index>(centers.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  RandomRkhsFunction f{kernel, centers, MatrixXd(nf, m), gamma_target};
  for (Index c = 0; c < m; ++c) {
    for (Index o = 0; o < nf; ++o) f.coefficients(o, c) = normal(rng);
  }
  const MatrixXd kcc = kernel_matrix(kernel, centers);
  const VectorXd a = f.coefficients.reshaped();
  const double sq = a.dot(kcc * a);
  if (!(sq > 1e-14 * a.squaredNorm() * std::max(1.0, kcc.diagonal().maxCoeff()))) {
    throw NumericalError("random_rkhs_function: center Gram matrix is numerically singular");
  }
  f.coefficients *= gamma_target / std::sqrt(sq);
  return f;
}

VectorXd measured_values(const Problem<double>& problem, const RandomRkhsFunction& f) {
  VectorXd v(problem.size());
  for (Index i = 0; i < problem.size(); ++i) {
    v(i) = problem.measurements.col(i).dot(f(problem.inputs[static_cast<std::size_t>(i)]));
  }
  return v;
}

IllustrativeScenario gen_illustrative(std::uint64_t seed) {
  constexpr int kData = 2;
  constexpr int kCenters = 6;
  constexpr double kNoise = 0.2;
  constexpr double kStep = 0.025;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> train(-2.0, 2.0);
  std::uniform_real_distribution<double> span(-3.0, 3.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  IllustrativeScenario s{};
  s.problem.kernel = Kernel<double>::squared_exponential(1, 1.0);
  s.problem.gamma_f = 1.0;
  PointList<double> centers;
  for (int c = 0; c < kCenters; ++c) centers.push_back(VectorXd::Constant(1, span(rng)));
  for (int i = 0; i < kData; ++i) s.problem.inputs.push_back(VectorXd::Constant(1, train(rng)));
  s.truth = random_rkhs_function(s.problem.kernel, 0.9, centers, rng());
  s.problem.measurements = MatrixXd::Ones(1, kData);
  s.noise = VectorXd(kData);
  for (int i = 0; i < kData; ++i) s.noise(i) = kNoise * unit(rng);
  s.problem.y = measured_values(s.problem, s.truth) + s.noise;
  s.problem.noise = NoiseModel<double>::pointwise(VectorXd::Constant(kData, kNoise));

  const int count = static_cast<int>(std::lround(6.0 / kStep)) + 1;
  s.grid.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) s.grid[static_cast<std::size_t>(i)] = -3.0 + kStep * i;
  s.anchor = static_cast<Index>(std::lround((kIllustrativeAnchor + 3.0) / kStep));
  s.grid[static_cast<std::size_t>(s.anchor)] = kIllustrativeAnchor;
  return s;
}

void QuadrotorConfig::validate() const {
  if (n_data < 1) throw std::invalid_argument("quadrotor: n_data must be at least 1");
  if (!(wind_a > 0) || !(wind_b > 0)) throw std::invalid_argument("quadrotor: wind semi-axes must be positive");
  if (!(lengthscale > 0) || !(period > 0)) throw std::invalid_argument("quadrotor: kernel parameters must be positive");
  if (!(gamma_target > 0) || !(gamma_target < gamma_f)) {
    throw std::invalid_argument("quadrotor: need 0 < gamma_target < gamma_f");
  }
  if (n_centers < 1) throw std::invalid_argument("quadrotor: n_centers must be at least 1");
}

Matrix2d wind_form(double theta, double a, double b) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Matrix2d r;
  r << c, -s, s, c;
  const Matrix2d d = Eigen::Vector2d(1.0 / (a * a), 1.0 / (b * b)).asDiagonal();
  // Body-frame noise R^T w_global for w_global^T D w_global <= 1.
  return r.transpose() * d * r;
}

QuadrotorScenario gen_quadrotor(const QuadrotorConfig& config) {
  config.validate();
  constexpr double kTwoPi = 6.283185307179586;
  const Index nd = config.n_data;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  QuadrotorScenario s{};
  s.config = config;
  auto& p = s.problem;
  const ScalarKernel<double> per = Periodic<double>{config.lengthscale, config.period};
  p.kernel = Kernel<double>::diagonal(1, {per, per});
  p.gamma_f = config.gamma_f;

  PointList<double> centers;
  for (int c = 0; c < config.n_centers; ++c) centers.push_back(VectorXd::Constant(1, angle(rng)));
  s.truth = random_rkhs_function(p.kernel, config.gamma_target, centers, rng());

  s.tilt.resize(nd);
  p.measurements = MatrixXd::Zero(2, 2 * nd);
  std::vector<NoiseConstraint<double>> constraints;
  s.noise.resize(2 * nd);
  for (Index j = 0; j < nd; ++j) {
    const double theta = angle(rng);
    s.tilt(j) = theta;
    p.inputs.push_back(VectorXd::Constant(1, theta));
    p.inputs.push_back(VectorXd::Constant(1, theta));
    p.measurements(0, 2 * j) = 1.0;
    p.measurements(1, 2 * j + 1) = 1.0;

    NoiseConstraint<double> c;
    c.support = {2 * j, 2 * j + 1};
    c.block = wind_form(theta, config.wind_a, config.wind_b);
    c.gamma = 1.0;
    constraints.push_back(std::move(c));

    // Uniform draw inside the global wind ellipse, rotated into the body frame.
    const double rad = std::sqrt(unit(rng));
    const double phi = angle(rng);
    const Eigen::Vector2d wg(config.wind_a * rad * std::cos(phi), config.wind_b * rad * std::sin(phi));
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    s.noise(2 * j) = ct * wg(0) + st * wg(1);
    s.noise(2 * j + 1) = -st * wg(0) + ct * wg(1);
  }
  p.noise = NoiseModel<double>::from_blocks(2 * nd, std::move(constraints));
  p.y = measured_values(p, s.truth) + s.noise;
  return s;
}

Problem<double> pointwise_conversion(const Problem<double>& problem, double gamma_bar) {
  Problem<double> out = problem;
  out.noise = NoiseModel<double>::pointwise(VectorXd::Constant(problem.size(), gamma_bar));
  return out;
}

Problem<double> pointwise_variant(const QuadrotorScenario& scenario, Index coordinate) {
  const auto& src = scenario.problem;
  if (coordinate < 0 || coordinate >= src.output_dim()) throw std::invalid_argument("pointwise_variant: bad coordinate");
  std::vector<Index> keep;
  for (Index i = 0; i < src.size(); ++i) {
    if (src.measurements(coordinate, i) != 0.0) keep.push_back(i);
  }
  Problem<double> out;
  out.kernel = src.kernel;
  out.gamma_f = src.gamma_f;
  const Index n = static_cast<Index>(keep.size());
  out.measurements.resize(src.output_dim(), n);
  out.y.resize(n);
  for (Index k = 0; k < n; ++k) {
    const Index i = keep[static_cast<std::size_t>(k)];
    out.inputs.push_back(src.inputs[static_cast<std::size_t>(i)]);
    out.measurements.col(k) = src.measurements.col(i);
    out.y(k) = src.y(i);
  }
  const double gamma_bar = std::max(scenario.config.wind_a, scenario.config.wind_b);
  out.noise = NoiseModel<double>::pointwise(VectorXd::Constant(n, gamma_bar));
  return out;
}

}  // namespace rkhsbound
