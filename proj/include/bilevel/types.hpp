#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string_view>

namespace bilevel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// λ lives in R^m, ω lives in R^n.
using OuterVariable = Vector;
using InnerVariable = Vector;

struct Dims {
  std::size_t inner = 0;  // n
  std::size_t outer = 0;  // m
};

enum class Mode { kImproved, kBasic };

std::string_view to_string(Mode mode);

bool all_finite(const Vector& v);

}  // namespace bilevel
