#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <numeric>
#include <vector>

#include "rkhsbound/errors.hpp"
#include "rkhsbound/types.hpp"

namespace rkhsbound {

template <typename Scalar>
struct SymmetricEigen {
  Vec<Scalar> values;   // ascending
  Mat<Scalar> vectors;  // columns match values; empty when only values were requested
};

/// Eigendecomposition of a symmetric matrix. Falls back to an SVD, with
/// eigenvalue signs recovered from Rayleigh quotients, when the tridiagonal
/// QR iteration does not converge.
template <typename Scalar>
SymmetricEigen<Scalar> symmetric_eigen(const Mat<Scalar>& a, bool with_vectors = true) {
  const Mat<Scalar> s = Scalar{0.5} * (a + a.transpose());
  SymmetricEigen<Scalar> out;
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(s, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() == Eigen::Success && es.eigenvalues().allFinite()) {
    out.values = es.eigenvalues();
    if (with_vectors) out.vectors = es.eigenvectors();
    return out;
  }
  Eigen::BDCSVD<Mat<Scalar>> svd(s, Eigen::ComputeThinU);
  const Mat<Scalar>& u = svd.matrixU();
  if (!u.allFinite()) throw NumericalError("symmetric eigendecomposition failed");
  const Index n = s.rows();
  Vec<Scalar> lambda(n);
  for (Index i = 0; i < n; ++i) lambda(i) = u.col(i).dot(s * u.col(i));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return lambda(x) < lambda(y); });
  out.values.resize(n);
  if (with_vectors) out.vectors.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    out.values(i) = lambda(order[static_cast<std::size_t>(i)]);
    if (with_vectors) out.vectors.col(i) = u.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace rkhsbound
