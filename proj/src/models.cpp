#include "bilevel/models.hpp"

#include "bilevel/error.hpp"

#include <chrono>
#include <cmath>
#include <string>

namespace bilevel {

void SolveConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, what); };
  if (!(t > 0.0)) fail("t must be positive");
  if (!(s > 0.0)) fail("s must be positive");
  if (!(eta > 0.0)) fail("eta must be positive");
  if (K < 1) fail("K must be >= 1");
  if (T < 1) fail("T must be >= 1");
  if (bigsam_frequency < 1) fail("bigsam_frequency must be >= 1");
}

InnerSolveSpec SolveConfig::inner_spec() const {
  InnerSolveSpec spec;
  spec.K = K;
  spec.alpha_exponent = alpha_exponent;
  spec.bigsam_frequency = bigsam_frequency;
  spec.t = t;
  spec.s = s;
  return spec;
}

ExperimentTrace run_model(const BilevelProblem& problem, const OuterVariable& lambda0,
                          const SolveConfig& config, const MetricFn& metric,
                          const RunOptions& options) {
  config.validate();
  if (static_cast<std::size_t>(lambda0.size()) != problem.dims().outer) {
    throw Error(ErrorCode::kDimensionMismatch, "lambda0 length does not match problem");
  }
  using Clock = std::chrono::steady_clock;

  ExperimentTrace trace;
  trace.records.reserve(config.T);
  OuterVariable lambda = lambda0;
  const InnerSolveSpec spec = config.inner_spec();

  for (std::size_t it = 0; it < config.T; ++it) {
    const auto start = Clock::now();
    TraceRecord rec;
    rec.iter = it;
    try {
      const Tape tape = solve_inner(problem, lambda, spec, config.mode);
      rec.outer_value = problem.g_value(tape.final(), lambda);
      const Hypergradient G = reverse_hypergradient(problem, tape);
      if (!std::isfinite(rec.outer_value) || !G.values.allFinite()) {
        throw Error(ErrorCode::kOracleDivergence, "non-finite outer value or hypergradient");
      }
      rec.grad_norm = G.values.norm();
      if (metric) rec.metric = metric(tape.final(), lambda);
      trace.final_omega = tape.final();
      if (it + 1 < config.T) lambda -= config.eta * G.values;
    } catch (const Error& e) {
      throw Error(e.code(), "outer iteration " + std::to_string(it) + ": " + e.detail());
    }
    if (options.record_timing) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    }
    trace.records.push_back(rec);
    if (options.on_record) options.on_record(trace.records.back());
  }
  trace.final_lambda = lambda;
  return trace;
}

std::vector<ExperimentTrace> run_ablation(const BilevelProblem& problem,
                                          const OuterVariable& lambda0,
                                          const SolveConfig& base_config,
                                          const std::vector<std::size_t>& frequencies,
                                          const MetricFn& metric, const RunOptions& options) {
  if (base_config.mode != Mode::kImproved) {
    throw Error(ErrorCode::kInvalidArgument, "ablation requires an improved-mode base config");
  }
  std::vector<ExperimentTrace> traces;
  traces.reserve(frequencies.size());
  for (std::size_t freq : frequencies) {
    SolveConfig cfg = base_config;
    if (freq == kNeverBigsam) {
      cfg.mode = Mode::kBasic;
    } else {
      cfg.bigsam_frequency = freq;
    }
    traces.push_back(run_model(problem, lambda0, cfg, metric, options));
  }
  return traces;
}

}  // namespace bilevel
