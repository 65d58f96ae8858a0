#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace stls {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using SparseMat = Eigen::SparseMatrix<Scalar, Eigen::ColMajor>;

using VectorXd = Vec<double>;
using MatrixXd = Mat<double>;
using SparseXd = SparseMat<double>;

/// Raised on inconsistent dimensions, rank-deficient structure, or invalid
/// configuration.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw StructuralError(what);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// Singular values at or below this are treated as zero.
template <typename Scalar>
Scalar rank_tolerance(Eigen::Index rows, Eigen::Index cols, Scalar sigma_max) {
  return static_cast<Scalar>(std::max(rows, cols)) *
         std::numeric_limits<Scalar>::epsilon() * sigma_max;
}

/// Moore-Penrose pseudo-inverse via SVD with the library-wide rank tolerance.
template <typename Derived>
Mat<typename Derived::Scalar> pinv(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() == 0 || m.cols() == 0) return Mat<Scalar>::Zero(m.cols(), m.rows());
  Eigen::BDCSVD<Mat<Scalar>> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Scalar tol = rank_tolerance<Scalar>(m.rows(), m.cols(), s(0));
  Vec<Scalar> inv_s(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) inv_s(i) = s(i) > tol ? Scalar(1) / s(i) : Scalar(0);
  return svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose();
}

/// Numerical rank with the library-wide tolerance.
template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::BDCSVD<Mat<Scalar>> svd(m);
  const auto& s = svd.singularValues();
  const Scalar tol = rank_tolerance<Scalar>(m.rows(), m.cols(), s(0));
  return (s.array() > tol).count();
}

template <typename Scalar>
Scalar sign(Scalar v) {
  return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0));
}

}  // namespace stls
