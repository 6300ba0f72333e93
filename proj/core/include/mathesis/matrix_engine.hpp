#pragma once

#include <Eigen/Core>

#include <vector>

#include "mathesis/errors.hpp"

namespace mathesis {

using Mat = Eigen::MatrixXd;

/// One linear-algebra energy term: nonnegative value plus the analytic
/// gradient with respect to each input matrix, in call order. Callers that
/// pass the same matrix twice sum the corresponding gradient entries.
struct MatrixEnergyTerm {
  double value = 0.0;
  std::vector<Mat> grads;
};

/// Squared Frobenius norm accumulated in row-major order (fixture
/// bit-reproducibility depends on the summation order being pinned).
double frobenius_sq(const Mat& m);

/// ||A - B||_F^2; grads 2(A-B), -2(A-B).
MatrixEnergyTerm e_eq(const Mat& a, const Mat& b);

/// ||A - A^T||_F^2; grad 2(A-A^T) - 2(A-A^T)^T.
MatrixEnergyTerm e_sym(const Mat& a);

/// ||AB - C||_F^2; grads 2(AB-C)B^T, 2A^T(AB-C), -2(AB-C).
MatrixEnergyTerm e_mult(const Mat& a, const Mat& b, const Mat& c);

/// ||A^T A - I||_F^2; grad 4A(A^T A - I).
MatrixEnergyTerm e_orth(const Mat& a);

/// ||A A_inv - I||_F^2; product-rule grads. A singular A just scores a
/// positive energy; nothing throws.
MatrixEnergyTerm e_inv(const Mat& a, const Mat& a_inv);

}  // namespace mathesis
