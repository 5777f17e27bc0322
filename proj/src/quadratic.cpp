#include "bilevel/problems.hpp"

#include "bilevel/error.hpp"

namespace bilevel {

QuadraticBilevel::QuadraticBilevel(std::string name, QuadraticBilevelSpec spec)
    : name_(std::move(name)), spec_(std::move(spec)) {
  const Eigen::Index n = spec_.A_h.rows();
  const Eigen::Index m = spec_.B_h.cols();
  const bool ok = n >= 1 && m >= 1 && spec_.A_h.cols() == n && spec_.B_h.rows() == n &&
                  spec_.b_h.size() == n && spec_.A_g.rows() == n && spec_.A_g.cols() == n &&
                  spec_.c_g.size() == n &&
                  (spec_.C_h.size() == 0 || (spec_.C_h.rows() == m && spec_.C_h.cols() == m));
  if (!ok) throw Error(ErrorCode::kDimensionMismatch, "inconsistent quadratic bilevel spec");
  if (spec_.C_h.size() == 0) spec_.C_h = Matrix::Zero(m, m);
  dims_ = {static_cast<std::size_t>(n), static_cast<std::size_t>(m)};
}

// Values are written as explicit loops: the brute-force grid oracle calls
// them tens of millions of times and Eigen products would allocate.
double QuadraticBilevel::g_value(const Vector& omega, const Vector&) const {
  const Eigen::Index n = omega.size();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double di = omega(i) - spec_.c_g(i);
    for (Eigen::Index j = 0; j < n; ++j) total += di * spec_.A_g(i, j) * (omega(j) - spec_.c_g(j));
  }
  return 0.5 * total;
}

double QuadraticBilevel::h_value(const Vector& omega, const Vector& lambda) const {
  const Eigen::Index n = omega.size();
  const Eigen::Index m = lambda.size();
  double quad = 0.0;
  double lin = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double bi = spec_.b_h(i);
    for (Eigen::Index j = 0; j < m; ++j) bi += spec_.B_h(i, j) * lambda(j);
    lin += bi * omega(i);
    for (Eigen::Index j = 0; j < n; ++j) quad += omega(i) * spec_.A_h(i, j) * omega(j);
  }
  double lam_quad = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) lam_quad += lambda(i) * spec_.C_h(i, j) * lambda(j);
  }
  return 0.5 * quad - lin + 0.5 * lam_quad;
}

Vector QuadraticBilevel::grad1_g(const Vector& omega, const Vector&) const {
  return spec_.A_g * (omega - spec_.c_g);
}

Vector QuadraticBilevel::grad2_g(const Vector&, const Vector&) const {
  return Vector::Zero(static_cast<Eigen::Index>(dims_.outer));
}

Vector QuadraticBilevel::grad1_h(const Vector& omega, const Vector& lambda) const {
  return spec_.A_h * omega - spec_.B_h * lambda - spec_.b_h;
}

Vector QuadraticBilevel::vjp11_h(const Vector& a, const Vector&, const Vector&) const {
  return spec_.A_h.transpose() * a;
}

Vector QuadraticBilevel::vjp12_h(const Vector& a, const Vector&, const Vector&) const {
  return -(spec_.B_h.transpose() * a);
}

Vector QuadraticBilevel::vjp11_g(const Vector& a, const Vector&, const Vector&) const {
  return spec_.A_g.transpose() * a;
}

Vector QuadraticBilevel::vjp12_g(const Vector&, const Vector&, const Vector&) const {
  return Vector::Zero(static_cast<Eigen::Index>(dims_.outer));
}

namespace {

QuadraticBilevelSpec closedform_spec() {
  QuadraticBilevelSpec s;
  s.A_h = Matrix::Ones(1, 1);
  s.B_h = Matrix::Ones(1, 1);
  s.b_h = Vector::Zero(1);
  s.C_h = Matrix::Ones(1, 1);
  s.A_g = Matrix::Ones(1, 1);
  s.c_g = Vector::Zero(1);
  return s;
}

QuadraticBilevelSpec degenerate_spec() {
  QuadraticBilevelSpec s;
  s.A_h = Matrix::Zero(2, 2);
  s.A_h(0, 0) = 1.0;
  s.B_h = Matrix::Zero(2, 1);
  s.B_h(0, 0) = 1.0;
  s.b_h = Vector::Zero(2);
  s.C_h = Matrix::Ones(1, 1);
  s.A_g = Matrix::Identity(2, 2);
  s.c_g = Vector::Zero(2);
  s.c_g(1) = 1.0;
  return s;
}

}  // namespace

ClosedFormQuadratic::ClosedFormQuadratic()
    : QuadraticBilevel("closedform_quadratic", closedform_spec()) {}

DegenerateQuadratic::DegenerateQuadratic()
    : QuadraticBilevel("degenerate_quadratic", degenerate_spec()) {}

Vector DegenerateQuadratic::improved_inner_solution(double lambda) {
  return Eigen::Vector2d(lambda, 1.0);
}

Vector DegenerateQuadratic::basic_inner_solution(double lambda) {
  return Eigen::Vector2d(lambda, 0.0);
}

std::unique_ptr<ClosedFormQuadratic> make_closedform_quadratic() {
  return std::make_unique<ClosedFormQuadratic>();
}

std::unique_ptr<DegenerateQuadratic> make_degenerate_quadratic() {
  return std::make_unique<DegenerateQuadratic>();
}

}  // namespace bilevel
