#pragma once

#include "bilevel/problem.hpp"
#include "bilevel/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace bilevel {

struct OraclePoint {
  std::string label;
  double rel_error = 0.0;
};

struct OracleReport {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = true;  // max_rel_error <= tolerance
  std::vector<OraclePoint> details;

  void add(std::string label, double rel_error);
};

nlohmann::json to_json(const OracleReport& report);
nlohmann::json to_json(const std::vector<OracleReport>& reports);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct GridMinResult {
  OuterVariable lambda;
  InnerVariable omega;
  double value = 0.0;
};

// Points closer than this to the per-λ grid minimum of h count as Ω*_λ.
inline constexpr double kArgminBand = 1e-6;

/// Exhaustive referee for min_λ min_{ω ∈ Ω*_λ} g(ω, λ) on a tensor grid
/// (m ≤ 2, n ≤ 2). Ties go to the lowest lexicographic grid index.
GridMinResult grid_min_oracle(const BilevelProblem& problem, const std::vector<Interval>& lambda_box,
                              const std::vector<Interval>& omega_box, std::size_t resolution);

struct CheckConfig {
  std::string label = "default";
  double first_order_tol = 1e-6;
  double vjp_tol = 1e-4;
  double hypergrad_tol = 1e-4;
  std::size_t points = 5;
  std::vector<std::size_t> Ks = {5, 50, 500};
  std::vector<Mode> modes = {Mode::kImproved, Mode::kBasic};
  double t = 0.1;
  double s = 0.1;
  double alpha_exponent = 0.25;
  std::uint64_t seed = 0;
  std::size_t grid_resolution = 101;
  double grid_tol = 0.05;
  double grid_halfwidth = 2.0;
};

// Seeded point in the unit ball of R^dim.
Vector random_unit_ball(std::size_t dim, std::uint64_t seed, std::string_view tag,
                        std::uint64_t index);

/// Runs, per config: first-order validation, analytic VJP vs fd_vjp,
/// reverse-mode vs finite-difference hypergradient and (when m, n ≤ 2 and the
/// problem knows its minimum) the grid-min referee.
std::vector<OracleReport> check_suite(const BilevelProblem& problem,
                                      const std::vector<CheckConfig>& configs);

}  // namespace bilevel
