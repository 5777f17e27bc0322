#pragma once

#include "bilevel/types.hpp"

#include <vector>

namespace bilevel::detail {

// Row-wise softmax of logits Z (N × C).
Matrix softmax_rows(const Matrix& Z);

// Per-row cross-entropy −log p_{y_i}, computed from logits with log-sum-exp.
Vector xent_rows(const Matrix& Z, const std::vector<int>& y);

// P − onehot(y).
Matrix xent_residual(const Matrix& P, const std::vector<int>& y);

// Row-wise Hessian of the cross-entropy w.r.t. logits applied to dZ:
// p ⊙ dz − p (pᵀdz). Independent of the label.
Matrix xent_hessian_apply(const Matrix& P, const Matrix& dZ);

inline Eigen::Map<const Matrix> as_matrix(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline Vector flatten(const Matrix& M) {
  return Eigen::Map<const Vector>(M.data(), M.size());
}

}  // namespace bilevel::detail
