#pragma once

#include "bilevel/problem.hpp"

#include <memory>
#include <vector>

namespace bilevel {

// h(ω, λ) = ½ωᵀA_hω − (B_hλ + b_h)ᵀω + ½λᵀC_hλ
// g(ω, λ) = ½(ω − c_g)ᵀA_g(ω − c_g)
// A_h is PSD and may be singular; A_g must be PD. C_h only shifts h by a
// λ-dependent constant so that h can be written as a completed square.
struct QuadraticBilevelSpec {
  Matrix A_h;
  Matrix B_h;  // n × m
  Vector b_h;
  Matrix C_h;  // m × m, may be empty
  Matrix A_g;
  Vector c_g;
};

class QuadraticBilevel : public BilevelProblem {
 public:
  QuadraticBilevel(std::string name, QuadraticBilevelSpec spec);

  std::string name() const override { return name_; }
  Dims dims() const override { return dims_; }

  double g_value(const Vector& omega, const Vector& lambda) const override;
  double h_value(const Vector& omega, const Vector& lambda) const override;
  Vector grad1_g(const Vector& omega, const Vector& lambda) const override;
  Vector grad2_g(const Vector& omega, const Vector& lambda) const override;
  Vector grad1_h(const Vector& omega, const Vector& lambda) const override;

  Vector vjp11_h(const Vector& a, const Vector& omega, const Vector& lambda) const override;
  Vector vjp12_h(const Vector& a, const Vector& omega, const Vector& lambda) const override;
  Vector vjp11_g(const Vector& a, const Vector& omega, const Vector& lambda) const override;
  Vector vjp12_g(const Vector& a, const Vector& omega, const Vector& lambda) const override;

  VjpSource vjp_source(VjpTerm) const override { return VjpSource::kAnalytic; }

  const QuadraticBilevelSpec& spec() const { return spec_; }

 private:
  std::string name_;
  QuadraticBilevelSpec spec_;
  Dims dims_;
};

/// h = ½(ω − λ)², g = ½ω² with n = m = 1. Unique inner minimizer ω_λ = λ,
/// f(λ) = ½λ², min f = 0 at λ = 0.
class ClosedFormQuadratic : public QuadraticBilevel {
 public:
  ClosedFormQuadratic();

  static double inner_solution(double lambda) { return lambda; }
  static double f(double lambda) { return 0.5 * lambda * lambda; }
  static double grad_f(double lambda) { return lambda; }
  static constexpr double kMinF = 0.0;
  static constexpr double kArgminF = 0.0;

  std::optional<double> analytic_min() const override { return kMinF; }
};

/// h = ½(ω₁ − λ)² (flat in ω₂), g = ½ω₁² + ½(ω₂ − 1)², n = 2, m = 1.
/// Ω*_λ = {(λ, u)}. The g-optimal member is (λ, 1); gradient descent on h
/// from ω₂ = 0 never moves ω₂ and stops at (λ, 0).
class DegenerateQuadratic : public QuadraticBilevel {
 public:
  DegenerateQuadratic();

  static Vector improved_inner_solution(double lambda);
  static Vector basic_inner_solution(double lambda);
  static constexpr double kImprovedMin = 0.0;
  static constexpr double kBasicMin = 0.5;
  static constexpr double kGap = kBasicMin - kImprovedMin;

  std::optional<double> analytic_min() const override { return kImprovedMin; }
};

std::unique_ptr<ClosedFormQuadratic> make_closedform_quadratic();
std::unique_ptr<DegenerateQuadratic> make_degenerate_quadratic();

// Labeled design matrix used by the softmax-regression problems.
struct LabeledSet {
  Matrix X;               // N × d
  std::vector<int> y;     // labels in [0, C)
};

// Sum over rows of the softmax cross-entropy of X·W against y.
double softmax_xent_sum(const Matrix& X, const std::vector<int>& y, const Matrix& W);

/// Data hyper-cleaning with a linear softmax model.
///   ω = W (d × C, column-major), λ_i = un-normalized weight of train sample i
///   h = Σ_i σ(λ_i) l(y_i, x_i W)         (train)
///   g = Σ_j l(y_j, x_j W) + ridge ‖W‖²   (validation)
class HypercleanProblem : public BilevelProblem {
 public:
  HypercleanProblem(LabeledSet train, LabeledSet val, int num_classes, double ridge = 1e-4);

  std::string name() const override { return "hyperclean"; }
  Dims dims() const override { return dims_; }

  double g_value(const Vector& omega, const Vector& lambda) const override;
  double h_value(const Vector& omega, const Vector& lambda) const override;
  Vector grad1_g(const Vector& omega, const Vector& lambda) const override;
  Vector grad2_g(const Vector& omega, const Vector& lambda) const override;
  Vector grad1_h(const Vector& omega, const Vector& lambda) const override;

  // ∂h/∂λ_i = σ(λ_i)(1 − σ(λ_i)) · l(y_i, x_i W)
  Vector grad2_h(const Vector& omega, const Vector& lambda) const;

  Vector vjp11_h(const Vector& a, const Vector& omega, const Vector& lambda) const override;
  Vector vjp12_h(const Vector& a, const Vector& omega, const Vector& lambda) const override;
  Vector vjp11_g(const Vector& a, const Vector& omega, const Vector& lambda) const override;
  Vector vjp12_g(const Vector& a, const Vector& omega, const Vector& lambda) const override;

  VjpSource vjp_source(VjpTerm) const override { return VjpSource::kAnalytic; }

  // Per-sample training losses l(y_i, x_i W).
  Vector train_losses(const Vector& omega) const;
  // Accuracy of argmax(x W) on a labeled set.
  double accuracy(const LabeledSet& set, const Vector& omega) const;

  int num_classes() const { return classes_; }
  const LabeledSet& train() const { return train_; }
  const LabeledSet& val() const { return val_; }

 private:
  LabeledSet train_;
  LabeledSet val_;
  int classes_;
  double ridge_;
  Dims dims_;
};

struct Episode {
  LabeledSet train;
  LabeledSet val;
};

/// Hyper-representation learning with a shared linear feature map.
///   λ = P (d × r, column-major), ω = [W_1; …; W_T], W_i (r × C, column-major)
///   h = Σ_i l(X_i,tr P W_i),  g = Σ_i l(X_i,val P W_i) + ridge ‖ω‖²
class HyperrepProblem : public BilevelProblem {
 public:
  HyperrepProblem(std::vector<Episode> tasks, int num_classes, std::size_t rank,
                  double ridge = 1e-4);

  std::string name() const override { return "hyperrep"; }
  Dims dims() const override { return dims_; }

  double g_value(const Vector& omega, const Vector& lambda) const override;
  double h_value(const Vector& omega, const Vector& lambda) const override;
  Vector grad1_g(const Vector& omega, const Vector& lambda) const override;
  Vector grad2_g(const Vector& omega, const Vector& lambda) const override;
  Vector grad1_h(const Vector& omega, const Vector& lambda) const override;

  Vector vjp11_h(const Vector& a, const Vector& omega, const Vector& lambda) const override;
  Vector vjp12_h(const Vector& a, const Vector& omega, const Vector& lambda) const override;
  Vector vjp11_g(const Vector& a, const Vector& omega, const Vector& lambda) const override;
  Vector vjp12_g(const Vector& a, const Vector& omega, const Vector& lambda) const override;

  VjpSource vjp_source(VjpTerm) const override { return VjpSource::kAnalytic; }

  // Loss of one task on one split, used for block-independence checks.
  double task_loss(std::size_t task, bool validation, const Vector& omega,
                   const Vector& lambda) const;
  // Mean validation accuracy over tasks.
  double val_accuracy(const Vector& omega, const Vector& lambda) const;

  std::size_t num_tasks() const { return tasks_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t rank() const { return rank_; }

 private:
  Vector objective_grad1(bool validation, const Vector& omega, const Vector& lambda) const;
  Vector objective_vjp11(bool validation, const Vector& a, const Vector& omega,
                         const Vector& lambda) const;
  Vector objective_vjp12(bool validation, const Vector& a, const Vector& omega,
                         const Vector& lambda) const;

  std::vector<Episode> tasks_;
  int classes_;
  std::size_t rank_;
  std::size_t feature_dim_;
  double ridge_;
  Dims dims_;
};

}  // namespace bilevel
