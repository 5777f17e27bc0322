#pragma once

#include "bilevel/problem.hpp"
#include "bilevel/tape.hpp"

#include <cstdint>
#include <functional>
#include <optional>

namespace bilevel {

struct StepParams {
  double t = 0.0;      // step size on h
  double s = 0.0;      // step size on g
  double alpha = 1.0;  // weight of the h-step, in (0, 1]

  void validate() const;
};

struct InnerSolveSpec {
  std::size_t K = 1;
  double alpha_exponent = 0.25;
  // 1: every step is a BiG-SAM step. f: step k is a BiG-SAM step iff k % f == 0,
  // otherwise a plain gradient step on h (alpha = 1).
  std::size_t bigsam_frequency = 1;
  double t = 0.001;
  double s = 0.001;
  // Falls back to problem.initial_inner() when empty.
  std::optional<InnerVariable> omega0;
};

/// min(1, k^(−exponent)). Throws kInvalidIterationIndex for k == 0.
double alpha_schedule(std::uint64_t k, double exponent);

/// One averaged step
///   θ = ω − t ∇₁h(ω, λ),  φ = ω − s ∇₁g(ω, λ),  ω' = α θ + (1 − α) φ.
/// With alpha == 1 the g-gradient is not evaluated and ω' = θ.
InnerVariable bigsam_step(const BilevelProblem& problem, const InnerVariable& omega,
                          const OuterVariable& lambda, const StepParams& p);

// aᵀ∇₁Φ = a − tα·aᵀ∇₁₁h − s(1−α)·aᵀ∇₁₁g, evaluated at the step's input iterate.
Vector vjp_phi_omega(const BilevelProblem& problem, const Vector& a, const InnerVariable& omega,
                     const OuterVariable& lambda, const StepParams& p);

// aᵀ∇₂Φ = −tα·aᵀ∇₁₂h − s(1−α)·aᵀ∇₁₂g.
Vector vjp_phi_lambda(const BilevelProblem& problem, const Vector& a, const InnerVariable& omega,
                      const OuterVariable& lambda, const StepParams& p);

// Per-step α actually used by solve_inner for the transition ω_k -> ω_{k+1}.
double step_alpha(std::size_t k, const InnerSolveSpec& spec, Mode mode);

/// Runs K inner steps from ω_0 and records the trajectory. Basic mode forces
/// α ≡ 1 (plain gradient descent on h).
Tape solve_inner(const BilevelProblem& problem, const OuterVariable& lambda,
                 const InnerSolveSpec& spec, Mode mode);

// λ-free oracle pair for the standalone simple-bilevel solver.
struct SingleLevelOracle {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

/// Minimizes g over argmin h with K BiG-SAM iterations.
InnerVariable bigsam_standalone(const SingleLevelOracle& h, const SingleLevelOracle& g,
                                const InnerVariable& omega0, std::size_t K, double t, double s,
                                double alpha_exponent);

}  // namespace bilevel
