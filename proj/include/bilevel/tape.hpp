#pragma once

#include "bilevel/types.hpp"

#include <vector>

namespace bilevel {

// Recorded inner trajectory ω_0..ω_K. alphas[k] is the averaging weight used
// for the transition ω_k -> ω_{k+1}. Immutable once recorded.
struct Tape {
  std::vector<InnerVariable> iterates;
  std::vector<double> alphas;
  double t = 0.0;
  double s = 0.0;
  OuterVariable lambda_at_record;
  Mode mode = Mode::kImproved;
  // Number of ∇₁g evaluations performed while recording.
  std::size_t g_gradient_calls = 0;

  std::size_t steps() const { return alphas.size(); }
  const InnerVariable& final() const { return iterates.back(); }
};

}  // namespace bilevel
