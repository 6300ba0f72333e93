#include "mathesis/matrix_engine.hpp"

namespace mathesis {

namespace {
void check_same_shape(const Mat& a, const Mat& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(who) + ": dimension mismatch");
}
void check_square(const Mat& a, const char* who) {
  if (a.rows() != a.cols()) throw DimensionError(std::string(who) + ": square matrix required");
}
}  // namespace

double frobenius_sq(const Mat& m) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) s += m(i, j) * m(i, j);
  }
  return s;
}

MatrixEnergyTerm e_eq(const Mat& a, const Mat& b) {
  check_same_shape(a, b, "e_eq");
  Mat r = a - b;
  MatrixEnergyTerm t;
  t.value = frobenius_sq(r);
  t.grads = {2.0 * r, -2.0 * r};
  return t;
}

MatrixEnergyTerm e_sym(const Mat& a) {
  check_square(a, "e_sym");
  Mat r = a - a.transpose();
  MatrixEnergyTerm t;
  t.value = frobenius_sq(r);
  t.grads = {2.0 * r - 2.0 * r.transpose()};
  return t;
}

MatrixEnergyTerm e_mult(const Mat& a, const Mat& b, const Mat& c) {
  if (a.cols() != b.rows()) throw DimensionError("e_mult: inner dimension mismatch");
  Mat r = a * b - c;
  check_same_shape(r, c, "e_mult");
  MatrixEnergyTerm t;
  t.value = frobenius_sq(r);
  t.grads = {2.0 * r * b.transpose(), 2.0 * a.transpose() * r, -2.0 * r};
  return t;
}

MatrixEnergyTerm e_orth(const Mat& a) {
  check_square(a, "e_orth");
  Mat r = a.transpose() * a - Mat::Identity(a.rows(), a.cols());
  MatrixEnergyTerm t;
  t.value = frobenius_sq(r);
  t.grads = {4.0 * a * r};
  return t;
}

MatrixEnergyTerm e_inv(const Mat& a, const Mat& a_inv) {
  check_same_shape(a, a_inv, "e_inv");
  check_square(a, "e_inv");
  Mat r = a * a_inv - Mat::Identity(a.rows(), a.cols());
  MatrixEnergyTerm t;
  t.value = frobenius_sq(r);
  t.grads = {2.0 * r * a_inv.transpose(), 2.0 * a.transpose() * r};
  return t;
}

}  // namespace mathesis
