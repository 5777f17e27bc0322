#include "softmax.hpp"

#include <cmath>

namespace bilevel::detail {

Matrix softmax_rows(const Matrix& Z) {
  Matrix P(Z.rows(), Z.cols());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const double top = Z.row(i).maxCoeff();
    P.row(i) = (Z.row(i).array() - top).exp().matrix();
    P.row(i) /= P.row(i).sum();
  }
  return P;
}

Vector xent_rows(const Matrix& Z, const std::vector<int>& y) {
  Vector out(Z.rows());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const double top = Z.row(i).maxCoeff();
    const double lse = top + std::log((Z.row(i).array() - top).exp().sum());
    out(i) = lse - Z(i, y[static_cast<std::size_t>(i)]);
  }
  return out;
}

Matrix xent_residual(const Matrix& P, const std::vector<int>& y) {
  Matrix R = P;
  for (Eigen::Index i = 0; i < R.rows(); ++i) R(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  return R;
}

Matrix xent_hessian_apply(const Matrix& P, const Matrix& dZ) {
  const Vector inner = (P.array() * dZ.array()).rowwise().sum();
  Matrix out = P.array() * dZ.array();
  out.array() -= P.array().colwise() * inner.array();
  return out;
}

}  // namespace bilevel::detail
