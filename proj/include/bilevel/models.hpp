#pragma once

#include "bilevel/hypergrad.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace bilevel {

struct SolveConfig {
  double t = 0.001;
  double s = 0.001;
  double eta = 1.0;
  std::size_t K = 100;
  std::size_t T = 100;
  double alpha_exponent = 0.25;
  std::size_t bigsam_frequency = 1;
  std::uint64_t seed = 0;
  Mode mode = Mode::kImproved;

  void validate() const;
  InnerSolveSpec inner_spec() const;
};

// Task metric evaluated on ω̂_λ once per outer iteration (F1, accuracy, ...).
using MetricFn = std::function<double(const InnerVariable& omega_hat, const OuterVariable& lambda)>;

struct TraceRecord {
  std::size_t iter = 0;
  double outer_value = 0.0;  // f_K(λ) = g(ω̂_λ, λ)
  double grad_norm = 0.0;
  std::optional<double> metric;
  double wall_ms = 0.0;
};

struct ExperimentTrace {
  std::vector<TraceRecord> records;
  OuterVariable final_lambda;
  InnerVariable final_omega;
};

struct RunOptions {
  // Called after each record is appended; lets callers stream partial output.
  std::function<void(const TraceRecord&)> on_record;
  bool record_timing = true;
};

/// Outer loop: for each of T iterations, re-initialize ω_0, solve the inner
/// problem in config.mode, record f_K(λ), then step λ ← λ − η·G (no step
/// after the final record). The trace therefore holds T records and λ is
/// updated T − 1 times.
ExperimentTrace run_model(const BilevelProblem& problem, const OuterVariable& lambda0,
                          const SolveConfig& config, const MetricFn& metric = {},
                          const RunOptions& options = {});

// Frequency 0 means "never": a plain basic-mode run with the same budget.
inline constexpr std::size_t kNeverBigsam = 0;

std::vector<ExperimentTrace> run_ablation(const BilevelProblem& problem,
                                          const OuterVariable& lambda0,
                                          const SolveConfig& base_config,
                                          const std::vector<std::size_t>& frequencies,
                                          const MetricFn& metric = {},
                                          const RunOptions& options = {});

}  // namespace bilevel
