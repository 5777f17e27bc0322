#pragma once

#include "bilevel/bigsam.hpp"

namespace bilevel {

// Which transitions of the tape the reverse pass differentiates.
//  kAllTransitions: k = K−1 down to 0, i.e. every step including ω_0 -> ω_1.
//    This is the exact derivative of f_K(λ) = g(ω_K(λ), λ).
//  kSkipFirstTransition: k = K−1 down to 1, the literal loop bound of the
//    classic reverse-mode pseudo-code. Drops the λ-dependence of ω_1.
enum class ReverseBound { kAllTransitions, kSkipFirstTransition };

struct Hypergradient {
  Vector values;
  // Number of (vjp_phi_lambda, vjp_phi_omega) pairs evaluated.
  std::size_t vjp_pairs = 0;
};

/// Reverse-mode accumulation over a recorded trajectory:
///
///   a = ∇₁g(ω_K, λ),  G = ∇₂g(ω_K, λ)
///   for each differentiated transition k (descending):
///     G += aᵀ∇₂Φ_k(ω_k, λ);  a = aᵀ∇₁Φ_k(ω_k, λ)
///
/// Φ_k carries tape.alphas[k]; partials are taken at the step's input iterate.
Hypergradient reverse_hypergradient(const BilevelProblem& problem, const Tape& tape,
                                    ReverseBound bound = ReverseBound::kAllTransitions);

// f_K(λ) = g(ω̂_λ, λ) after a fresh inner solve.
double unrolled_objective(const BilevelProblem& problem, const OuterVariable& lambda,
                          const InnerSolveSpec& spec, Mode mode);

/// Central differences of f_K; every evaluation reruns the inner solve from
/// the same ω_0.
Hypergradient hypergradient_fd_oracle(const BilevelProblem& problem, const OuterVariable& lambda,
                                      const InnerSolveSpec& spec, Mode mode, double eps);

}  // namespace bilevel
