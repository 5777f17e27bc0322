#pragma once

#include "bilevel/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bilevel {

// Second-order terms a problem exposes as vector-Jacobian products.
// The adjoint enters on the left: h11 is aᵀ∇₁₁h (n-vector), h12 is aᵀ∇₁₂h
// (m-vector), and likewise for g.
enum class VjpTerm { kH11, kH12, kG11, kG12 };

enum class VjpSource { kAnalytic, kFdFallback };

std::string_view to_string(VjpTerm term);

/// Oracle interface for a bilevel problem
///
///   min_λ g(ω̂_λ, λ),   ω̂_λ ∈ argmin_ω h(ω, λ)
///
/// Implementations must be pure: every oracle is const, has no hidden
/// mutable state, and returns identical vectors for identical inputs.
/// Any VJP that is not overridden falls back to central finite differences
/// of the first-order gradients (see fd_vjp).
class BilevelProblem {
 public:
  virtual ~BilevelProblem() = default;

  virtual std::string name() const = 0;
  virtual Dims dims() const = 0;

  virtual double g_value(const Vector& omega, const Vector& lambda) const = 0;
  virtual double h_value(const Vector& omega, const Vector& lambda) const = 0;

  virtual Vector grad1_g(const Vector& omega, const Vector& lambda) const = 0;
  virtual Vector grad2_g(const Vector& omega, const Vector& lambda) const = 0;
  virtual Vector grad1_h(const Vector& omega, const Vector& lambda) const = 0;

  virtual Vector vjp11_h(const Vector& a, const Vector& omega, const Vector& lambda) const;
  virtual Vector vjp12_h(const Vector& a, const Vector& omega, const Vector& lambda) const;
  virtual Vector vjp11_g(const Vector& a, const Vector& omega, const Vector& lambda) const;
  virtual Vector vjp12_g(const Vector& a, const Vector& omega, const Vector& lambda) const;

  virtual VjpSource vjp_source(VjpTerm) const { return VjpSource::kFdFallback; }

  // Known value of min_λ g(ω*_λ, λ) with ω*_λ the g-best inner minimizer, when
  // the problem has a closed form. Used as a referee for the grid oracle.
  virtual std::optional<double> analytic_min() const { return std::nullopt; }

  // ω_0 used at the start of every inner solve. Zero unless overridden.
  virtual InnerVariable initial_inner() const;

  bool all_vjps_analytic() const;

  Vector vjp(VjpTerm term, const Vector& a, const Vector& omega, const Vector& lambda) const;

 protected:
  // Shared fallback: normalizes the adjoint so the perturbation stays at
  // the default step scale.
  Vector fallback_vjp(VjpTerm term, const Vector& a, const Vector& omega,
                      const Vector& lambda) const;
};

// Default central-difference step: 1e-5 * max(1, ‖point‖_∞).
double default_fd_step(const Vector& point);

/// Central finite-difference VJP.
///
///  - h11: [∇₁h(ω+eps·a, λ) − ∇₁h(ω−eps·a, λ)] / (2 eps)
///  - h12: entry j is [aᵀ∇₁h(ω, λ+eps·e_j) − aᵀ∇₁h(ω, λ−eps·e_j)] / (2 eps)
///  - g11/g12 analogous with ∇₁g.
///
/// Throws Error(kOracleDivergence) if a perturbed gradient is non-finite.
Vector fd_vjp(const BilevelProblem& problem, VjpTerm which, const Vector& a,
              const Vector& omega, const Vector& lambda, double eps);

struct GradientCheckEntry {
  std::string name;  // "grad1_g", "grad2_g" or "grad1_h"
  double max_rel_error = 0.0;
  bool pass = true;
};

struct FirstOrderReport {
  std::vector<GradientCheckEntry> entries;
  double tolerance = 0.0;

  bool pass() const;
  const GradientCheckEntry* find(std::string_view name) const;
};

// Error metric shared by the gradient checks: |x − y| / max(1, |x|, |y|).
double mixed_rel_error(double x, double y);
double mixed_rel_error(const Vector& x, const Vector& y);

// Relative error in vector norm: ‖x − y‖ / max(‖x‖, ‖y‖, floor).
double norm_rel_error(const Vector& x, const Vector& y, double floor = 1e-12);

/// Compares analytic first-order gradients against central differences of
/// g_value / h_value. Failures are report entries, never exceptions.
FirstOrderReport validate_first_order(const BilevelProblem& problem, const Vector& omega,
                                      const Vector& lambda, double eps, double tol);

}  // namespace bilevel
