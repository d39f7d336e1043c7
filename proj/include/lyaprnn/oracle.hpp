#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/SVD>

#include "lyaprnn/cells.hpp"
#include "lyaprnn/errors.hpp"
#include "lyaprnn/linalg.hpp"

namespace lyaprnn {
namespace oracle {

namespace detail {

inline Mat explicit_product(const std::vector<Mat>& jacobians) {
  if (jacobians.empty()) throw DimensionError("oracle: empty Jacobian list");
  const Index n = jacobians.front().rows();
  for (const Mat& j : jacobians) {
    if (j.rows() != n || j.cols() != n) {
      throw DimensionError("oracle: Jacobians must all be square of equal size");
    }
  }
  Mat P = Mat::Identity(n, n);
  for (const Mat& j : jacobians) {
    P = j * P;  // chronological order: P = J_T ... J_2 J_1
    if (!P.allFinite()) {
      throw NumericalError(
          "oracle: explicit Jacobian product overflowed to non-finite values");
    }
  }
  return P;
}

}  // namespace detail

/// Brute-force reference: forms the explicit product J_T ... J_1, takes a
/// single non-negative-diagonal QR, and returns log(R_ii) / T. Only for small
/// T and well-scaled systems (the product is held explicitly, O(T N^3)).
inline Vec product_qr_exponents(const std::vector<Mat>& jacobians) {
  const Mat P = detail::explicit_product(jacobians);
  const auto qr = qr_positive(P);
  const double T = static_cast<double>(jacobians.size());
  Vec lambda(P.rows());
  for (Index i = 0; i < P.rows(); ++i) {
    lambda(i) = std::log(qr.R(i, i)) / T;
  }
  if (!lambda.allFinite()) {
    throw NumericalError(
        "oracle: degenerate product (zero R diagonal) gives non-finite exponents");
  }
  return lambda;
}

/// Brute-force reference via singular values of the explicit product:
/// log(sigma_i) / T, sorted descending.
inline Vec svd_exponents(const std::vector<Mat>& jacobians) {
  const Mat P = detail::explicit_product(jacobians);
  Eigen::BDCSVD<Mat> svd(P);
  const double T = static_cast<double>(jacobians.size());
  Vec lambda = (svd.singularValues().array().log() / T).matrix();
  if (!lambda.allFinite()) {
    throw NumericalError(
        "oracle: singular product gives non-finite exponents");
  }
  std::sort(lambda.data(), lambda.data() + lambda.size(),
            [](double a, double b) { return a > b; });
  return lambda;
}

/// Collects the stacked Jacobians along a trajectory: J_t evaluated at the
/// pre-update state for t = 1..steps, advancing the state with the same
/// (state, input) pairs the estimator consumes. Test/diagnostic plumbing.
inline std::vector<Mat> jacobian_sequence(const std::vector<CellParams>& cells,
                                          const Mat& x_seq, NetState state,
                                          int steps) {
  if (x_seq.rows() < steps) {
    throw DimensionError("jacobian_sequence: sequence shorter than steps");
  }
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    auto [next, J] = step_with_jacobian(cells, state, x_seq.row(t).transpose());
    out.push_back(std::move(J));
    state = std::move(next);
  }
  return out;
}

}  // namespace oracle
}  // namespace lyaprnn
