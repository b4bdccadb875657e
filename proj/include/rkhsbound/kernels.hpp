#pragma once

// Matrix-valued kernels, projected Gram assembly and Gram factorization.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "rkhsbound/errors.hpp"
#include "rkhsbound/linalg.hpp"
#include "rkhsbound/types.hpp"

namespace rkhsbound {

/// Scalar squared-exponential kernel exp(-|x - x'|^2 / lengthscale^2).
template <typename Scalar>
struct SquaredExponential {
  Scalar lengthscale{1};

  Scalar operator()(const Vec<Scalar>& x, const Vec<Scalar>& xp) const {
    using std::exp;
    return exp(-(x - xp).squaredNorm() / (lengthscale * lengthscale));
  }
};

/// Scalar periodic kernel exp(-2 sum_d sin^2(pi |x_d - x'_d| / period) / lengthscale^2).
template <typename Scalar>
struct Periodic {
  Scalar lengthscale{1};
  Scalar period{2 * std::numbers::pi_v<Scalar>};

  Scalar operator()(const Vec<Scalar>& x, const Vec<Scalar>& xp) const {
    using std::exp;
    using std::sin;
    Scalar acc{0};
    for (Index d = 0; d < x.size(); ++d) {
      const Scalar s = sin(std::numbers::pi_v<Scalar> * (x(d) - xp(d)) / period);
      acc += s * s;
    }
    return exp(-2 * acc / (lengthscale * lengthscale));
  }
};

template <typename Scalar>
using ScalarKernel = std::variant<SquaredExponential<Scalar>, Periodic<Scalar>>;

/// Independent outputs: k(x, x') = diag(k_1(x, x'), ..., k_nf(x, x')).
template <typename Scalar>
struct DiagonalKernel {
  std::vector<ScalarKernel<Scalar>> outputs;
};

/// Finite-dimensional hypothesis space: k(x, x') = Phi(x) Phi(x')^T with
/// Phi(x) of size output_dim x feature_dim.
template <typename Scalar>
struct FeatureKernel {
  std::function<Mat<Scalar>(const Vec<Scalar>&)> features;
  Index output_dim{1};
  Index feature_dim{1};
  // Degree of the built-in polynomial map, -1 for user-supplied maps.
  int polynomial_degree{-1};
};

// Per-output monomials [1, x_1, .., x_n, x_1^2, .., x_n^degree] with no
// cross terms, replicated block-diagonally across outputs.
template <typename Scalar>
FeatureKernel<Scalar> polynomial_features(Index input_dim, Index output_dim, int degree) {
  if (degree < 0 || input_dim < 1 || output_dim < 1) {
    throw std::invalid_argument("polynomial_features: invalid dimensions");
  }
  const Index per_output = 1 + input_dim * degree;
  FeatureKernel<Scalar> fk;
  fk.output_dim = output_dim;
  fk.feature_dim = per_output * output_dim;
  fk.polynomial_degree = degree;
  fk.features = [=](const Vec<Scalar>& x) {
    Vec<Scalar> mono(per_output);
    mono(0) = Scalar{1};
    for (int p = 1; p <= degree; ++p) {
      for (Index d = 0; d < input_dim; ++d) {
        using std::pow;
        mono(1 + (p - 1) * input_dim + d) = pow(x(d), p);
      }
    }
    Mat<Scalar> phi = Mat<Scalar>::Zero(output_dim, per_output * output_dim);
    for (Index o = 0; o < output_dim; ++o) {
      phi.block(o, o * per_output, 1, per_output) = mono.transpose();
    }
    return phi;
  };
  return fk;
}

template <typename Scalar>
Scalar eval_scalar_kernel(const ScalarKernel<Scalar>& k, const Vec<Scalar>& x, const Vec<Scalar>& xp) {
  return std::visit([&](const auto& kernel) { return kernel(x, xp); }, k);
}

/// A positive-semidefinite, possibly matrix-valued kernel on R^input_dim.
template <typename Scalar>
class Kernel {
 public:
  using Family = std::variant<SquaredExponential<Scalar>, Periodic<Scalar>, DiagonalKernel<Scalar>,
                              FeatureKernel<Scalar>>;

  Kernel() = default;

  static Kernel squared_exponential(Index input_dim, Scalar lengthscale = Scalar{1}) {
    check_positive(lengthscale, "lengthscale");
    return Kernel(input_dim, 1, SquaredExponential<Scalar>{lengthscale});
  }

  static Kernel periodic(Index input_dim, Scalar lengthscale = Scalar{1},
                         Scalar period = 2 * std::numbers::pi_v<Scalar>) {
    check_positive(lengthscale, "lengthscale");
    check_positive(period, "period");
    return Kernel(input_dim, 1, Periodic<Scalar>{lengthscale, period});
  }

  static Kernel diagonal(Index input_dim, std::vector<ScalarKernel<Scalar>> outputs) {
    if (outputs.empty()) throw std::invalid_argument("diagonal kernel needs at least one output");
    for (const auto& k : outputs) {
      std::visit(
          [](const auto& kk) {
            check_positive(kk.lengthscale, "lengthscale");
            if constexpr (std::is_same_v<std::decay_t<decltype(kk)>, Periodic<Scalar>>) {
              check_positive(kk.period, "period");
            }
          },
          k);
    }
    const auto n = static_cast<Index>(outputs.size());
    return Kernel(input_dim, n, DiagonalKernel<Scalar>{std::move(outputs)});
  }

  static Kernel features(Index input_dim, FeatureKernel<Scalar> fk) {
    if (!fk.features || fk.output_dim < 1 || fk.feature_dim < 1) {
      throw std::invalid_argument("feature kernel needs a map and positive dimensions");
    }
    const Index nf = fk.output_dim;
    return Kernel(input_dim, nf, std::move(fk));
  }

  Index input_dim() const { return input_dim_; }
  Index output_dim() const { return output_dim_; }
  const Family& family() const { return family_; }

  /// n_f x n_f kernel matrix k(x, x').
  Mat<Scalar> operator()(const Vec<Scalar>& x, const Vec<Scalar>& xp) const {
    if (x.size() != input_dim_ || xp.size() != input_dim_) {
      throw std::invalid_argument("kernel: input dimension mismatch (expected " +
                                  std::to_string(input_dim_) + ")");
    }
    return std::visit(
        [&](const auto& k) -> Mat<Scalar> {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, DiagonalKernel<Scalar>>) {
            Mat<Scalar> out = Mat<Scalar>::Zero(output_dim_, output_dim_);
            for (Index o = 0; o < output_dim_; ++o) {
              out(o, o) = eval_scalar_kernel(k.outputs[static_cast<std::size_t>(o)], x, xp);
            }
            return out;
          } else if constexpr (std::is_same_v<K, FeatureKernel<Scalar>>) {
            const Mat<Scalar> a = k.features(x);
            const Mat<Scalar> b = k.features(xp);
            return a * b.transpose();
          } else {
            Mat<Scalar> out(1, 1);
            out(0, 0) = k(x, xp);
            return out;
          }
        },
        family_);
  }

  /// Scalar c^T k(x, x') c'.
  Scalar projected(const Vec<Scalar>& x, const Vec<Scalar>& c, const Vec<Scalar>& xp,
                   const Vec<Scalar>& cp) const {
    return c.dot((*this)(x, xp) * cp);
  }

 private:
  Kernel(Index input_dim, Index output_dim, Family family)
      : input_dim_(input_dim), output_dim_(output_dim), family_(std::move(family)) {
    if (input_dim_ < 1) throw std::invalid_argument("kernel: input_dim must be positive");
  }

  static void check_positive(Scalar v, const char* what) {
    if (!(v > Scalar{0})) throw std::invalid_argument(std::string("kernel: ") + what + " must be positive");
  }

  Index input_dim_{1};
  Index output_dim_{1};
  Family family_{SquaredExponential<Scalar>{}};
};

/// Full and projected Gram blocks for N training inputs plus one test input.
/// `measurement` is the N x n_f N block-diagonal matrix with rows c_i^T.
template <typename Scalar>
struct GramSystem {
  Mat<Scalar> full;        // n_f (N+1) square, training inputs first
  Mat<Scalar> measurement; // N x n_f N
  Mat<Scalar> cross;       // K_{N+1,1:N}: n_f x n_f N
  Mat<Scalar> projected;   // C^T K_{1:N,1:N} C: N x N
};

/// Kernel matrix [k(x_i, x_j)] over a list of points.
template <typename Scalar>
Mat<Scalar> kernel_matrix(const Kernel<Scalar>& kernel, const PointList<Scalar>& points) {
  const Index nf = kernel.output_dim();
  const Index n = static_cast<Index>(points.size());
  Mat<Scalar> k(nf * n, nf * n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      const Mat<Scalar> kij = kernel(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
      k.block(i * nf, j * nf, nf, nf) = kij;
      if (j != i) k.block(j * nf, i * nf, nf, nf) = kij.transpose();
    }
  }
  return k;
}

namespace detail {
template <typename Scalar>
void check_measurements(const Kernel<Scalar>& kernel, const Mat<Scalar>& measurements, Index n) {
  if (measurements.cols() != n || measurements.rows() != kernel.output_dim()) {
    throw std::invalid_argument("measurement matrix must be n_f x N");
  }
}
}  // namespace detail

/// Projected training Gram G_ij = c_i^T k(x_i, x_j) c_j. `measurements` holds
/// c_i as columns (n_f x N).
template <typename Scalar>
Mat<Scalar> projected_gram(const Kernel<Scalar>& kernel, const PointList<Scalar>& inputs,
                           const Mat<Scalar>& measurements) {
  const Index n = static_cast<Index>(inputs.size());
  detail::check_measurements(kernel, measurements, n);
  Mat<Scalar> g(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      const Scalar v = kernel.projected(inputs[static_cast<std::size_t>(i)], measurements.col(i),
                                        inputs[static_cast<std::size_t>(j)], measurements.col(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

/// Cross block K_{*,1:N} C: column j is k(x*, x_j) c_j (n_f x N).
template <typename Scalar>
Mat<Scalar> projected_cross(const Kernel<Scalar>& kernel, const Vec<Scalar>& x_star,
                            const PointList<Scalar>& inputs, const Mat<Scalar>& measurements) {
  const Index n = static_cast<Index>(inputs.size());
  detail::check_measurements(kernel, measurements, n);
  Mat<Scalar> b(kernel.output_dim(), n);
  for (Index j = 0; j < n; ++j) {
    b.col(j) = kernel(x_star, inputs[static_cast<std::size_t>(j)]) * measurements.col(j);
  }
  return b;
}

/// Assemble every block of the Gram system. `inputs` holds N+1 points, the last
/// one being the test input.
template <typename Scalar>
GramSystem<Scalar> assemble_gram(const Kernel<Scalar>& kernel, const PointList<Scalar>& inputs,
                                 const Mat<Scalar>& measurements) {
  if (inputs.empty()) throw std::invalid_argument("assemble_gram: need at least the test input");
  const Index n = static_cast<Index>(inputs.size()) - 1;
  detail::check_measurements(kernel, measurements, n);
  const Index nf = kernel.output_dim();

  GramSystem<Scalar> gs;
  gs.full = kernel_matrix(kernel, inputs);
  gs.measurement = Mat<Scalar>::Zero(n, nf * n);
  for (Index i = 0; i < n; ++i) gs.measurement.block(i, i * nf, 1, nf) = measurements.col(i).transpose();
  gs.cross = gs.full.block(n * nf, 0, nf, n * nf);
  const Mat<Scalar> ktrain = gs.full.topLeftCorner(n * nf, n * nf);
  gs.projected = gs.measurement * ktrain * gs.measurement.transpose();
  return gs;
}

/// Full-column-rank factor Phi with Phi Phi^T ~= K.
template <typename Scalar>
struct FeatureSpaceProblem {
  Mat<Scalar> features;  // n_f (N+1) x r
  Index output_dim{1};

  Index rank() const { return features.cols(); }
  // Rows belonging to input i (n_f x r).
  auto block(Index i) const { return features.middleRows(i * output_dim, output_dim); }
};

/// Factorize a symmetric PSD matrix by eigendecomposition, dropping
/// eigenvalues at or below `relative_threshold` times the largest one.
template <typename Scalar>
FeatureSpaceProblem<Scalar> factorize_gram(const Mat<Scalar>& k, Index output_dim = 1,
                                           Scalar relative_threshold = Scalar{1e-10}) {
  if (k.rows() != k.cols()) throw std::invalid_argument("factorize_gram: matrix must be square");
  using std::abs;
  const Scalar scale = k.cwiseAbs().maxCoeff() + Scalar{1};
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > Scalar{1e-10} * scale) {
    throw NumericalError("factorize_gram: matrix is not symmetric");
  }
  FeatureSpaceProblem<Scalar> fs;
  fs.output_dim = output_dim;
  if (k.rows() == 0) {
    fs.features.resize(0, 0);
    return fs;
  }
  const auto es = symmetric_eigen<Scalar>(k);
  const Vec<Scalar>& ev = es.values;
  const Scalar top = ev.cwiseAbs().maxCoeff();
  if (ev(0) < -Scalar{1e-10} * top) {
    throw NumericalError("factorize_gram: matrix is not positive semidefinite");
  }
  const Scalar cutoff = relative_threshold * top;
  Index keep = 0;
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cutoff) ++keep;
  }
  // Eigenvalues are ascending; keep the trailing ones, largest first.
  fs.features.resize(k.rows(), keep);
  for (Index c = 0; c < keep; ++c) {
    const Index src = ev.size() - 1 - c;
    using std::sqrt;
    fs.features.col(c) = es.vectors.col(src) * sqrt(ev(src));
  }
  return fs;
}

}  // namespace rkhsbound
