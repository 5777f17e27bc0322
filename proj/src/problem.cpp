#include "bilevel/problem.hpp"

#include "bilevel/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bilevel {

std::string_view to_string(Mode mode) {
  return mode == Mode::kImproved ? "improved" : "basic";
}

bool all_finite(const Vector& v) { return v.allFinite(); }

std::string_view to_string(VjpTerm term) {
  switch (term) {
    case VjpTerm::kH11: return "h11";
    case VjpTerm::kH12: return "h12";
    case VjpTerm::kG11: return "g11";
    case VjpTerm::kG12: return "g12";
  }
  return "?";
}

Vector BilevelProblem::vjp11_h(const Vector& a, const Vector& omega, const Vector& lambda) const {
  return fallback_vjp(VjpTerm::kH11, a, omega, lambda);
}
Vector BilevelProblem::vjp12_h(const Vector& a, const Vector& omega, const Vector& lambda) const {
  return fallback_vjp(VjpTerm::kH12, a, omega, lambda);
}
Vector BilevelProblem::vjp11_g(const Vector& a, const Vector& omega, const Vector& lambda) const {
  return fallback_vjp(VjpTerm::kG11, a, omega, lambda);
}
Vector BilevelProblem::vjp12_g(const Vector& a, const Vector& omega, const Vector& lambda) const {
  return fallback_vjp(VjpTerm::kG12, a, omega, lambda);
}

InnerVariable BilevelProblem::initial_inner() const {
  return Vector::Zero(static_cast<Eigen::Index>(dims().inner));
}

bool BilevelProblem::all_vjps_analytic() const {
  for (auto t : {VjpTerm::kH11, VjpTerm::kH12, VjpTerm::kG11, VjpTerm::kG12}) {
    if (vjp_source(t) != VjpSource::kAnalytic) return false;
  }
  return true;
}

Vector BilevelProblem::vjp(VjpTerm term, const Vector& a, const Vector& omega,
                           const Vector& lambda) const {
  switch (term) {
    case VjpTerm::kH11: return vjp11_h(a, omega, lambda);
    case VjpTerm::kH12: return vjp12_h(a, omega, lambda);
    case VjpTerm::kG11: return vjp11_g(a, omega, lambda);
    case VjpTerm::kG12: return vjp12_g(a, omega, lambda);
  }
  return {};
}

Vector BilevelProblem::fallback_vjp(VjpTerm term, const Vector& a, const Vector& omega,
                                    const Vector& lambda) const {
  const bool wrt_omega = term == VjpTerm::kH11 || term == VjpTerm::kG11;
  const auto out_len = static_cast<Eigen::Index>(wrt_omega ? dims().inner : dims().outer);
  const double scale = a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return Vector::Zero(out_len);
  const double eps = default_fd_step(wrt_omega ? omega : lambda);
  return scale * fd_vjp(*this, term, a / scale, omega, lambda, eps);
}

double default_fd_step(const Vector& point) {
  const double inf_norm = point.size() == 0 ? 0.0 : point.cwiseAbs().maxCoeff();
  return 1e-5 * std::max(1.0, inf_norm);
}

namespace {

Vector grad1_of(const BilevelProblem& p, bool of_h, const Vector& omega, const Vector& lambda,
                const char* where) {
  Vector grad = of_h ? p.grad1_h(omega, lambda) : p.grad1_g(omega, lambda);
  if (!grad.allFinite()) {
    throw Error(ErrorCode::kOracleDivergence,
                std::string("non-finite ") + (of_h ? "grad1_h" : "grad1_g") + " at perturbed " +
                    where);
  }
  return grad;
}

}  // namespace

Vector fd_vjp(const BilevelProblem& problem, VjpTerm which, const Vector& a, const Vector& omega,
              const Vector& lambda, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "fd_vjp: eps must be positive");
  if (!a.allFinite()) throw Error(ErrorCode::kInvalidArgument, "fd_vjp: adjoint is not finite");
  const auto n = static_cast<Eigen::Index>(problem.dims().inner);
  const auto m = static_cast<Eigen::Index>(problem.dims().outer);
  if (a.size() != n) throw Error(ErrorCode::kDimensionMismatch, "fd_vjp: adjoint length != n");

  const bool of_h = which == VjpTerm::kH11 || which == VjpTerm::kH12;
  if (which == VjpTerm::kH11 || which == VjpTerm::kG11) {
    const Vector plus = grad1_of(problem, of_h, omega + eps * a, lambda, "omega + eps*a");
    const Vector minus = grad1_of(problem, of_h, omega - eps * a, lambda, "omega - eps*a");
    return (plus - minus) / (2.0 * eps);
  }

  Vector out(m);
  Vector shifted = lambda;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double saved = shifted(j);
    shifted(j) = saved + eps;
    const double up = a.dot(grad1_of(problem, of_h, omega, shifted, "lambda + eps*e_j"));
    shifted(j) = saved - eps;
    const double down = a.dot(grad1_of(problem, of_h, omega, shifted, "lambda - eps*e_j"));
    shifted(j) = saved;
    out(j) = (up - down) / (2.0 * eps);
  }
  return out;
}

double mixed_rel_error(double x, double y) {
  const double denom = std::max({1.0, std::abs(x), std::abs(y)});
  return std::abs(x - y) / denom;
}

double mixed_rel_error(const Vector& x, const Vector& y) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) worst = std::max(worst, mixed_rel_error(x(i), y(i)));
  return worst;
}

double norm_rel_error(const Vector& x, const Vector& y, double floor) {
  const double denom = std::max({x.norm(), y.norm(), floor});
  return (x - y).norm() / denom;
}

bool FirstOrderReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

const GradientCheckEntry* FirstOrderReport::find(std::string_view name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

namespace {

template <typename F>
Vector central_gradient(F&& f, Vector x, double eps) {
  Vector out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double saved = x(j);
    x(j) = saved + eps;
    const double up = f(x);
    x(j) = saved - eps;
    const double down = f(x);
    x(j) = saved;
    out(j) = (up - down) / (2.0 * eps);
  }
  return out;
}

GradientCheckEntry compare(std::string name, const Vector& analytic, const Vector& numeric,
                           double tol) {
  GradientCheckEntry e;
  e.name = std::move(name);
  e.max_rel_error = analytic.size() == numeric.size() ? mixed_rel_error(analytic, numeric)
                                                      : std::numeric_limits<double>::infinity();
  if (!std::isfinite(e.max_rel_error)) e.max_rel_error = std::numeric_limits<double>::infinity();
  e.pass = e.max_rel_error <= tol;
  return e;
}

}  // namespace

FirstOrderReport validate_first_order(const BilevelProblem& problem, const Vector& omega,
                                      const Vector& lambda, double eps, double tol) {
  FirstOrderReport report;
  report.tolerance = tol;

  auto g_of_omega = [&](const Vector& w) { return problem.g_value(w, lambda); };
  auto g_of_lambda = [&](const Vector& l) { return problem.g_value(omega, l); };
  auto h_of_omega = [&](const Vector& w) { return problem.h_value(w, lambda); };

  report.entries.push_back(compare("grad1_g", problem.grad1_g(omega, lambda),
                                   central_gradient(g_of_omega, omega, eps), tol));
  report.entries.push_back(compare("grad2_g", problem.grad2_g(omega, lambda),
                                   central_gradient(g_of_lambda, lambda, eps), tol));
  report.entries.push_back(compare("grad1_h", problem.grad1_h(omega, lambda),
                                   central_gradient(h_of_omega, omega, eps), tol));
  return report;
}

}  // namespace bilevel
