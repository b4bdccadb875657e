#pragma once

// Ellipsoidal noise constraints w^T P_j w < gamma_j^2 and the surrogate noise
// covariance K^w_sigma = (sum_j sigma_j^-2 P_j)^-1.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rkhsbound/errors.hpp"
#include "rkhsbound/linalg.hpp"
#include "rkhsbound/types.hpp"

namespace rkhsbound {

inline constexpr double kDefaultSigmaCap = 1e8;

/// One ellipsoidal constraint. P_j is stored as a dense block on the index
/// set `support`; rows and columns outside the support are zero.
template <typename Scalar>
struct NoiseConstraint {
  std::vector<Index> support;
  Mat<Scalar> block;
  Scalar gamma{1};
  // Local factor F with block = F F^T (|support| x rank).
  Mat<Scalar> factor;

  Vec<Scalar> gather(const Vec<Scalar>& v) const {
    Vec<Scalar> out(static_cast<Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) out(static_cast<Index>(k)) = v(support[k]);
    return out;
  }

  Scalar quadratic(const Vec<Scalar>& u) const {
    const Vec<Scalar> us = gather(u);
    return us.dot(block * us);
  }

  Scalar bilinear(const Vec<Scalar>& u, const Vec<Scalar>& v) const {
    return gather(u).dot(block * gather(v));
  }
};

enum class NoiseKind { Pointwise, Energy, General };

template <typename Scalar>
class NoiseModel {
 public:
  NoiseModel() = default;

  /// |w_j| < bounds_j for every measurement j.
  static NoiseModel pointwise(const Vec<Scalar>& bounds) {
    NoiseModel nm;
    nm.kind_ = NoiseKind::Pointwise;
    nm.size_ = bounds.size();
    for (Index j = 0; j < bounds.size(); ++j) {
      if (!(bounds(j) > Scalar{0})) {
        throw std::invalid_argument("pointwise_noise: bound " + std::to_string(j) + " must be positive");
      }
      NoiseConstraint<Scalar> c;
      c.support = {j};
      c.block = Mat<Scalar>::Ones(1, 1);
      c.gamma = bounds(j);
      nm.constraints_.push_back(std::move(c));
    }
    nm.finalize();
    return nm;
  }

  /// w^T P1 w < gamma^2 with P1 positive definite.
  static NoiseModel energy(const Mat<Scalar>& p1, Scalar gamma) {
    if (p1.rows() != p1.cols()) throw std::invalid_argument("energy_noise: P1 must be square");
    if (!(gamma > Scalar{0})) throw std::invalid_argument("energy_noise: gamma must be positive");
    if (p1.rows() > 0) {
      if (!(symmetric_eigen<Scalar>(p1, false).values(0) > Scalar{0})) throw std::invalid_argument("energy_noise: P1 must be positive definite");
    }
    NoiseModel nm;
    nm.kind_ = NoiseKind::Energy;
    nm.size_ = p1.rows();
    NoiseConstraint<Scalar> c;
    for (Index i = 0; i < p1.rows(); ++i) c.support.push_back(i);
    c.block = Scalar{0.5} * (p1 + p1.transpose());
    c.gamma = gamma;
    nm.constraints_.push_back(std::move(c));
    nm.finalize();
    return nm;
  }

  /// Arbitrary collection of dense N x N PSD matrices with radii.
  static NoiseModel general(Index n, const std::vector<std::pair<Mat<Scalar>, Scalar>>& terms) {
    NoiseModel nm;
    nm.kind_ = NoiseKind::General;
    nm.size_ = n;
    for (const auto& [p, gamma] : terms) {
      if (p.rows() != n || p.cols() != n) throw std::invalid_argument("general noise: matrix must be N x N");
      NoiseConstraint<Scalar> c;
      for (Index i = 0; i < n; ++i) {
        if (p.row(i).cwiseAbs().maxCoeff() > Scalar{0} || p.col(i).cwiseAbs().maxCoeff() > Scalar{0}) {
          c.support.push_back(i);
        }
      }
      const auto m = static_cast<Index>(c.support.size());
      c.block.resize(m, m);
      for (Index a = 0; a < m; ++a) {
        for (Index b = 0; b < m; ++b) {
          c.block(a, b) = Scalar{0.5} * (p(c.support[static_cast<std::size_t>(a)], c.support[static_cast<std::size_t>(b)]) +
                                         p(c.support[static_cast<std::size_t>(b)], c.support[static_cast<std::size_t>(a)]));
        }
      }
      c.gamma = gamma;
      nm.constraints_.push_back(std::move(c));
    }
    nm.finalize();
    return nm;
  }

  /// General model from constraints given directly on their support.
  static NoiseModel from_blocks(Index n, std::vector<NoiseConstraint<Scalar>> constraints) {
    NoiseModel nm;
    nm.kind_ = NoiseKind::General;
    nm.size_ = n;
    for (auto& c : constraints) {
      if (c.block.rows() != static_cast<Index>(c.support.size()) || c.block.cols() != c.block.rows()) {
        throw std::invalid_argument("noise constraint block does not match its support");
      }
      for (Index s : c.support) {
        if (s < 0 || s >= n) throw std::invalid_argument("noise constraint support out of range");
      }
      c.block = Scalar{0.5} * (c.block + c.block.transpose()).eval();
    }
    nm.constraints_ = std::move(constraints);
    nm.finalize();
    return nm;
  }

  NoiseKind kind() const { return kind_; }
  Index size() const { return size_; }
  Index num_constraints() const { return static_cast<Index>(constraints_.size()); }
  const NoiseConstraint<Scalar>& constraint(Index j) const { return constraints_[static_cast<std::size_t>(j)]; }
  const std::vector<NoiseConstraint<Scalar>>& constraints() const { return constraints_; }

  Vec<Scalar> gammas() const {
    Vec<Scalar> g(num_constraints());
    for (Index j = 0; j < num_constraints(); ++j) g(j) = constraint(j).gamma;
    return g;
  }

  /// P_j as a dense N x N matrix.
  Mat<Scalar> dense(Index j) const {
    const auto& c = constraint(j);
    Mat<Scalar> p = Mat<Scalar>::Zero(size_, size_);
    for (std::size_t a = 0; a < c.support.size(); ++a) {
      for (std::size_t b = 0; b < c.support.size(); ++b) {
        p(c.support[a], c.support[b]) = c.block(static_cast<Index>(a), static_cast<Index>(b));
      }
    }
    return p;
  }

  /// sum_j weights_j P_j.
  Mat<Scalar> weighted_sum(const Vec<Scalar>& weights) const {
    Mat<Scalar> p = Mat<Scalar>::Zero(size_, size_);
    for (Index j = 0; j < num_constraints(); ++j) {
      if (weights(j) == Scalar{0}) continue;
      const auto& c = constraint(j);
      for (std::size_t a = 0; a < c.support.size(); ++a) {
        for (std::size_t b = 0; b < c.support.size(); ++b) {
          p(c.support[a], c.support[b]) += weights(j) * c.block(static_cast<Index>(a), static_cast<Index>(b));
        }
      }
    }
    return p;
  }

  /// Slack gamma_j^2 - w^T P_j w for every constraint.
  Vec<Scalar> margins(const Vec<Scalar>& w) const {
    Vec<Scalar> m(num_constraints());
    for (Index j = 0; j < num_constraints(); ++j) {
      m(j) = constraint(j).gamma * constraint(j).gamma - constraint(j).quadratic(w);
    }
    return m;
  }

  bool contains(const Vec<Scalar>& w) const {
    return num_constraints() == 0 || margins(w).minCoeff() > Scalar{0};
  }

  /// Natural starting point for the noise parameters: gamma_j for pointwise
  /// and energy models, 1 otherwise.
  Vec<Scalar> default_sigma() const {
    if (kind_ == NoiseKind::General) return Vec<Scalar>::Ones(num_constraints());
    return gammas();
  }

 private:
  void finalize() {
    for (auto& c : constraints_) {
      if (!(c.gamma > Scalar{0})) throw std::invalid_argument("noise constraint radius must be positive");
      const Index m = c.block.rows();
      if (m == 0) {
        c.factor.resize(0, 0);
        continue;
      }
      const auto es = symmetric_eigen<Scalar>(c.block);
      const Vec<Scalar>& ev = es.values;
      const Scalar top = ev.cwiseAbs().maxCoeff();
      if (ev(0) < -Scalar{1e-10} * std::max(top, c.block.trace())) {
        throw std::invalid_argument("noise constraint matrix is not positive semidefinite");
      }
      Index keep = 0;
      for (Index i = 0; i < m; ++i) {
        if (ev(i) > Scalar{1e-12} * top) ++keep;
      }
      c.factor.resize(m, keep);
      for (Index k = 0; k < keep; ++k) {
        using std::sqrt;
        const Index src = m - 1 - k;
        c.factor.col(k) = es.vectors.col(src) * sqrt(ev(src));
      }
    }
    if (size_ > 0) {
      const Mat<Scalar> total = weighted_sum(Vec<Scalar>::Ones(num_constraints()));
      const Vec<Scalar> ev = symmetric_eigen<Scalar>(total, false).values;
      if (!(ev(0) > Scalar{1e-12} * ev(ev.size() - 1))) {
        throw std::invalid_argument("noise model: sum of constraint matrices is not positive definite");
      }
    }
  }

  NoiseKind kind_{NoiseKind::General};
  Index size_{0};
  std::vector<NoiseConstraint<Scalar>> constraints_;
};

template <typename Scalar>
NoiseModel<Scalar> pointwise_noise(const Vec<Scalar>& bounds) {
  return NoiseModel<Scalar>::pointwise(bounds);
}

template <typename Scalar>
NoiseModel<Scalar> energy_noise(const Mat<Scalar>& p1, Scalar gamma) {
  return NoiseModel<Scalar>::energy(p1, gamma);
}

/// Noise weights t_j = sigma_j^-2, zero for components at or beyond the cap.
template <typename Scalar>
Vec<Scalar> noise_weights(const Vec<Scalar>& sigma, Scalar cap = Scalar{kDefaultSigmaCap}) {
  Vec<Scalar> t(sigma.size());
  for (Index j = 0; j < sigma.size(); ++j) {
    if (!(sigma(j) > Scalar{0})) throw std::invalid_argument("noise parameters must be positive");
    t(j) = sigma(j) >= cap ? Scalar{0} : Scalar{1} / (sigma(j) * sigma(j));
  }
  return t;
}

template <typename Scalar>
struct SurrogateNoise {
  Mat<Scalar> covariance;  // K^w_sigma
  Mat<Scalar> precision;   // P^w_sigma
};

/// Explicit surrogate covariance and precision. Downstream solves never use
/// the explicit inverse; this is the reference construction.
template <typename Scalar>
SurrogateNoise<Scalar> build_Kw_sigma(const NoiseModel<Scalar>& noise, const Vec<Scalar>& sigma,
                                      Scalar cap = Scalar{kDefaultSigmaCap}) {
  if (sigma.size() != noise.num_constraints()) throw std::invalid_argument("sigma has wrong length");
  SurrogateNoise<Scalar> out;
  out.precision = noise.weighted_sum(noise_weights(sigma, cap));
  out.precision = Scalar{0.5} * (out.precision + out.precision.transpose()).eval();
  if (noise.size() == 0) {
    out.covariance.resize(0, 0);
    return out;
  }
  const auto es = symmetric_eigen<Scalar>(out.precision);
  const Vec<Scalar>& ev = es.values;
  if (!(ev(0) > Scalar{0}) || ev(ev.size() - 1) / ev(0) > Scalar{1e14}) {
    throw NumericalError("surrogate noise precision is numerically singular");
  }
  out.covariance = es.vectors * ev.cwiseInverse().asDiagonal() * es.vectors.transpose();
  return out;
}

}  // namespace rkhsbound
