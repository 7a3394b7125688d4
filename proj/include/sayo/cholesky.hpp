#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "sayo/error.hpp"

namespace sayo {

// Lower-triangular L with L * L^T == a for a symmetric positive semidefinite
// matrix. Zero pivots are accepted when the rest of their column vanishes,
// so singular correlation structures such as rho = 1 factor fine. Anything
// else raises a decomposition error naming the failing pivot.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> cholesky_lower(
    const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  require(a.rows() == a.cols(), ErrorCode::shape, "cholesky needs a square matrix");
  const Eigen::Index n = a.rows();
  const Scalar scale = n == 0 ? Scalar(1) : std::max(Scalar(1), a.diagonal().cwiseAbs().maxCoeff());
  const Scalar tol = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * scale * Scalar(std::max<Eigen::Index>(n, 1));

  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Scalar pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (pivot < -tol || !std::isfinite(pivot)) {
      fail(ErrorCode::decomposition,
           "matrix is not positive semidefinite (pivot " + std::to_string(j) +
               "); consider shrinking the correlations toward the identity");
    }
    if (pivot <= tol) {
      for (Eigen::Index i = j + 1; i < n; ++i) {
        const Scalar residual = a(i, j) - l.row(i).head(j).dot(l.row(j).head(j));
        if (std::abs(residual) > std::sqrt(tol)) {
          fail(ErrorCode::decomposition,
               "matrix is not positive semidefinite (pivot " + std::to_string(j) +
                   "); consider shrinking the correlations toward the identity");
        }
      }
      continue;
    }
    const Scalar diag = std::sqrt(pivot);
    l(j, j) = diag;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / diag;
    }
  }
  return l;
}

}  // namespace sayo
