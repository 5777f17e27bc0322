#include "bilevel/oracles.hpp"

#include "bilevel/error.hpp"
#include "bilevel/hypergrad.hpp"
#include "bilevel/rng.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <thread>

namespace bilevel {

void OracleReport::add(std::string label, double rel_error) {
  if (std::isnan(rel_error)) rel_error = std::numeric_limits<double>::infinity();
  details.push_back({std::move(label), rel_error});
  max_rel_error = std::max(max_rel_error, rel_error);
  pass = max_rel_error <= tolerance;
}

nlohmann::json to_json(const OracleReport& report) {
  nlohmann::json details = nlohmann::json::array();
  for (const auto& d : report.details) {
    details.push_back({{"label", d.label}, {"rel_error", d.rel_error}});
  }
  return {{"name", report.name},
          {"max_rel_error", report.max_rel_error},
          {"tolerance", report.tolerance},
          {"pass", report.pass},
          {"details", details}};
}

nlohmann::json to_json(const std::vector<OracleReport>& reports) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : reports) out.push_back(to_json(r));
  return out;
}

namespace {

std::vector<double> axis(const Interval& box, std::size_t resolution) {
  std::vector<double> out(resolution);
  const double step = (box.hi - box.lo) / static_cast<double>(resolution - 1);
  for (std::size_t i = 0; i < resolution; ++i) out[i] = box.lo + step * static_cast<double>(i);
  out.back() = box.hi;
  return out;
}

// All points of a tensor grid in lexicographic order (last coordinate fastest).
std::vector<Vector> tensor_grid(const std::vector<Interval>& box, std::size_t resolution) {
  std::vector<std::vector<double>> axes;
  for (const auto& b : box) axes.push_back(axis(b, resolution));
  std::size_t total = 1;
  for (std::size_t i = 0; i < box.size(); ++i) total *= resolution;
  std::vector<Vector> out;
  out.reserve(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    Vector p(static_cast<Eigen::Index>(box.size()));
    std::size_t rem = flat;
    for (std::size_t k = box.size(); k-- > 0;) {
      p(static_cast<Eigen::Index>(k)) = axes[k][rem % resolution];
      rem /= resolution;
    }
    out.push_back(std::move(p));
  }
  return out;
}

struct PerLambda {
  std::size_t omega_index = 0;
  double value = std::numeric_limits<double>::infinity();
};

PerLambda best_in_argmin_band(const BilevelProblem& problem, const Vector& lambda,
                              const std::vector<Vector>& omegas, std::vector<double>& h_buf) {
  double h_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    h_buf[i] = problem.h_value(omegas[i], lambda);
    h_min = std::min(h_min, h_buf[i]);
  }
  PerLambda best;
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    if (h_buf[i] > h_min + kArgminBand) continue;
    const double g = problem.g_value(omegas[i], lambda);
    if (g < best.value) best = {i, g};
  }
  return best;
}

}  // namespace

GridMinResult grid_min_oracle(const BilevelProblem& problem, const std::vector<Interval>& lambda_box,
                              const std::vector<Interval>& omega_box, std::size_t resolution) {
  const Dims d = problem.dims();
  if (d.outer > 2 || d.inner > 2) {
    throw Error(ErrorCode::kOracleDimLimit, "grid oracle supports m <= 2 and n <= 2");
  }
  if (lambda_box.size() != d.outer || omega_box.size() != d.inner) {
    throw Error(ErrorCode::kDimensionMismatch, "grid boxes do not match problem dimensions");
  }
  if (resolution < 3) throw Error(ErrorCode::kInvalidArgument, "resolution must be >= 3");

  const std::vector<Vector> lambdas = tensor_grid(lambda_box, resolution);
  const std::vector<Vector> omegas = tensor_grid(omega_box, resolution);
  std::vector<PerLambda> per(lambdas.size());

  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, lambdas.size());
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      std::vector<double> h_buf(omegas.size());
      for (std::size_t li = w; li < lambdas.size(); li += workers) {
        per[li] = best_in_argmin_band(problem, lambdas[li], omegas, h_buf);
      }
    }));
  }
  for (auto& j : jobs) j.get();

  std::size_t best = 0;
  for (std::size_t li = 1; li < per.size(); ++li) {
    if (per[li].value < per[best].value) best = li;
  }
  return {lambdas[best], omegas[per[best].omega_index], per[best].value};
}

Vector random_unit_ball(std::size_t dim, std::uint64_t seed, std::string_view tag,
                        std::uint64_t index) {
  Rng rng = Rng::derive(seed, tag, index);
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  const double norm = v.norm();
  if (norm == 0.0) return v;
  const double radius = std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
  return v * (radius / norm);
}

namespace {

constexpr double kVjpNoiseFloor = 1e-6;
constexpr double kHypergradNoiseFloor = 1e-10;

std::string point_label(std::size_t i) { return "point " + std::to_string(i); }

OracleReport check_first_order(const BilevelProblem& problem, const CheckConfig& cfg) {
  OracleReport r{cfg.label + "/first_order", 0.0, cfg.first_order_tol, true, {}};
  const Dims d = problem.dims();
  for (std::size_t i = 0; i < cfg.points; ++i) {
    const Vector omega = random_unit_ball(d.inner, cfg.seed, "check/omega", i);
    const Vector lambda = random_unit_ball(d.outer, cfg.seed, "check/lambda", i);
    const auto rep = validate_first_order(problem, omega, lambda, 1e-5, cfg.first_order_tol);
    for (const auto& e : rep.entries) r.add(point_label(i) + " " + e.name, e.max_rel_error);
  }
  return r;
}

OracleReport check_vjps(const BilevelProblem& problem, const CheckConfig& cfg) {
  OracleReport r{cfg.label + "/vjp", 0.0, cfg.vjp_tol, true, {}};
  const Dims d = problem.dims();
  for (std::size_t i = 0; i < cfg.points; ++i) {
    const Vector omega = random_unit_ball(d.inner, cfg.seed, "check/omega", i);
    const Vector lambda = random_unit_ball(d.outer, cfg.seed, "check/lambda", i);
    const Vector a = random_unit_ball(d.inner, cfg.seed, "check/adjoint", i);
    for (auto term : {VjpTerm::kH11, VjpTerm::kH12, VjpTerm::kG11, VjpTerm::kG12}) {
      if (problem.vjp_source(term) != VjpSource::kAnalytic) continue;
      const bool wrt_omega = term == VjpTerm::kH11 || term == VjpTerm::kG11;
      const double eps = default_fd_step(wrt_omega ? omega : lambda);
      double err = std::numeric_limits<double>::infinity();
      try {
        err = norm_rel_error(problem.vjp(term, a, omega, lambda),
                             fd_vjp(problem, term, a, omega, lambda, eps), kVjpNoiseFloor);
      } catch (const Error&) {
      }
      r.add(point_label(i) + " " + std::string(to_string(term)), err);
    }
  }
  return r;
}

OracleReport check_hypergradient(const BilevelProblem& problem, const CheckConfig& cfg) {
  OracleReport r{cfg.label + "/hypergrad", 0.0, cfg.hypergrad_tol, true, {}};
  const Dims d = problem.dims();
  for (Mode mode : cfg.modes) {
    for (std::size_t K : cfg.Ks) {
      InnerSolveSpec spec;
      spec.K = K;
      spec.t = cfg.t;
      spec.s = cfg.s;
      spec.alpha_exponent = cfg.alpha_exponent;
      for (std::size_t i = 0; i < cfg.points; ++i) {
        const Vector lambda = random_unit_ball(d.outer, cfg.seed, "check/hyper_lambda", i);
        double err = std::numeric_limits<double>::infinity();
        try {
          const Tape tape = solve_inner(problem, lambda, spec, mode);
          const Hypergradient rev = reverse_hypergradient(problem, tape);
          const Hypergradient fd =
              hypergradient_fd_oracle(problem, lambda, spec, mode, default_fd_step(lambda));
          err = norm_rel_error(rev.values, fd.values, kHypergradNoiseFloor);
        } catch (const Error&) {
        }
        r.add(std::string(to_string(mode)) + " K=" + std::to_string(K) + " " + point_label(i), err);
      }
    }
  }
  return r;
}

OracleReport check_grid_min(const BilevelProblem& problem, const CheckConfig& cfg) {
  OracleReport r{cfg.label + "/grid_min", 0.0, cfg.grid_tol, true, {}};
  const Dims d = problem.dims();
  const std::vector<Interval> lbox(d.outer, {-cfg.grid_halfwidth, cfg.grid_halfwidth});
  const std::vector<Interval> wbox(d.inner, {-cfg.grid_halfwidth, cfg.grid_halfwidth});
  const GridMinResult res = grid_min_oracle(problem, lbox, wbox, cfg.grid_resolution);
  r.add("grid vs analytic minimum", std::abs(res.value - *problem.analytic_min()));
  return r;
}

}  // namespace

std::vector<OracleReport> check_suite(const BilevelProblem& problem,
                                      const std::vector<CheckConfig>& configs) {
  std::vector<OracleReport> reports;
  const Dims d = problem.dims();
  for (const CheckConfig& cfg : configs) {
    reports.push_back(check_first_order(problem, cfg));
    reports.push_back(check_vjps(problem, cfg));
    reports.push_back(check_hypergradient(problem, cfg));
    if (d.inner <= 2 && d.outer <= 2 && problem.analytic_min()) {
      reports.push_back(check_grid_min(problem, cfg));
    }
  }
  return reports;
}

}  // namespace bilevel
