#pragma once

#include <Eigen/Dense>

#include <vector>

namespace rkhsbound {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using PointList = std::vector<Vec<Scalar>>;

using VectorXd = Vec<double>;
using MatrixXd = Mat<double>;
using Matrix2d = Eigen::Matrix2d;

}  // namespace rkhsbound
