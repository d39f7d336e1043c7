#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Dense>

#include "lyaprnn/errors.hpp"

namespace lyaprnn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

struct QrFactors {
  Mat Q;  // column-orthonormal, rows(M) x cols(M)
  Mat R;  // upper triangular, cols(M) x cols(M), non-negative diagonal
};

/// Thin (reduced) QR factorization with the sign convention R(i,i) >= 0,
/// enforced by flipping matched (column of Q, row of R) sign pairs. With this
/// convention the factorization of a full-column-rank matrix is unique, so the
/// diagonal of R is well-defined for log-expansion accumulation.
inline QrFactors qr_positive(const Mat& M) {
  const Index rows = M.rows();
  const Index cols = M.cols();
  if (rows < cols) {
    throw DimensionError("qr_positive: matrix has more columns than rows");
  }
  Eigen::HouseholderQR<Mat> qr(M);
  Mat Q = qr.householderQ() * Mat::Identity(rows, cols);
  Mat R = Mat(qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>());
  for (Index i = 0; i < cols; ++i) {
    if (R(i, i) < 0.0) {
      Q.col(i) = -Q.col(i);
      R.row(i) = -R.row(i);
    }
  }
  return {std::move(Q), std::move(R)};
}

/// log|det(M)| via partial-pivot LU. Returns -infinity for a singular matrix.
inline double log_abs_det(const Mat& M) {
  if (M.rows() != M.cols()) {
    throw DimensionError("log_abs_det: matrix is not square");
  }
  Eigen::PartialPivLU<Mat> lu(M);
  double acc = 0.0;
  for (Index i = 0; i < M.rows(); ++i) {
    acc += std::log(std::abs(lu.matrixLU()(i, i)));
  }
  return acc;
}

/// Largest absolute deviation of Q'Q from the identity; 0 for perfectly
/// orthonormal columns.
inline double orthonormality_defect(const Mat& Q) {
  return (Q.transpose() * Q - Mat::Identity(Q.cols(), Q.cols()))
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace lyaprnn
