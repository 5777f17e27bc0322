#include "bilevel/error.hpp"
#include "bilevel/hypergrad.hpp"
#include "bilevel/models.hpp"
#include "bilevel/oracles.hpp"
#include "bilevel/problems.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace bilevel {
namespace {

using testing::scalar;

SolveConfig config(double step, std::size_t K, std::size_t T, double eta) {
  SolveConfig c;
  c.t = c.s = step;
  c.K = K;
  c.T = T;
  c.eta = eta;
  return c;
}

void expect_same_trace(const ExperimentTrace& a, const ExperimentTrace& b) {
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].iter, b.records[i].iter);
    EXPECT_EQ(a.records[i].outer_value, b.records[i].outer_value) << i;
    EXPECT_EQ(a.records[i].grad_norm, b.records[i].grad_norm) << i;
    EXPECT_EQ(a.records[i].metric, b.records[i].metric) << i;
  }
  EXPECT_EQ(a.final_lambda, b.final_lambda);
  EXPECT_EQ(a.final_omega, b.final_omega);
}

// Generic strongly convex quadratic with a unique inner minimizer for every λ.
std::unique_ptr<QuadraticBilevel> strongly_convex_quadratic() {
  QuadraticBilevelSpec s;
  s.A_h = Matrix{{2.0, 0.5}, {0.5, 1.0}};
  s.B_h = Matrix{{1.0}, {0.5}};
  s.b_h = Vector::Zero(2);
  s.A_g = Matrix::Identity(2, 2);
  s.c_g = Eigen::Vector2d(0.3, 1.0);
  return std::make_unique<QuadraticBilevel>("strongly_convex_quadratic", s);
}

TEST(SolveConfig, Validation) {
  EXPECT_NO_THROW(SolveConfig{}.validate());
  for (auto mutate : std::vector<std::function<void(SolveConfig&)>>{
           [](SolveConfig& c) { c.t = 0.0; }, [](SolveConfig& c) { c.s = -1.0; },
           [](SolveConfig& c) { c.eta = 0.0; }, [](SolveConfig& c) { c.K = 0; },
           [](SolveConfig& c) { c.T = 0; }, [](SolveConfig& c) { c.bigsam_frequency = 0; }}) {
    SolveConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), Error);
  }
}

TEST(RunModel, SingleIterationDoesNotUpdate) {
  const auto p = make_closedform_quadratic();
  const ExperimentTrace trace = run_model(*p, scalar(2.0), config(0.1, 50, 1, 0.5));
  ASSERT_EQ(trace.records.size(), 1u);
  EXPECT_EQ(trace.final_lambda, scalar(2.0));
}

TEST(RunModel, ClosedFormOuterIterationContractsByFixedFactor) {
  // G = c²λ with c = ω_K(λ = 1), so each update multiplies λ by 1 − ηc².
  const auto p = make_closedform_quadratic();
  for (Mode mode : {Mode::kImproved, Mode::kBasic}) {
    SolveConfig cfg = config(0.1, 2000, 20, 0.5);
    cfg.mode = mode;
    const double c = solve_inner(*p, scalar(1.0), cfg.inner_spec(), mode).final()(0);
    const ExperimentTrace trace = run_model(*p, scalar(2.0), cfg);
    ASSERT_EQ(trace.records.size(), 20u);
    const double expected = 2.0 * std::pow(1.0 - 0.5 * c * c, 19);
    EXPECT_NEAR(trace.final_lambda(0), expected, 1e-10) << to_string(mode);
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
      const double lambda_i = 2.0 * std::pow(1.0 - 0.5 * c * c, i);
      EXPECT_NEAR(trace.records[i].outer_value, 0.5 * c * c * lambda_i * lambda_i, 1e-10);
    }
  }
}

TEST(RunModel, ClosedFormBasicHalvesLambda) {
  const auto p = make_closedform_quadratic();
  SolveConfig cfg = config(0.1, 2000, 20, 0.5);
  cfg.mode = Mode::kBasic;
  const ExperimentTrace trace = run_model(*p, scalar(2.0), cfg);
  EXPECT_NEAR(trace.final_lambda(0), 2.0 * std::pow(0.5, 19), 1e-9);
  EXPECT_NEAR(trace.records.back().outer_value, 0.0, 1e-3);
}

TEST(RunModel, MetricEvaluatedOncePerIteration) {
  const auto p = make_closedform_quadratic();
  int calls = 0;
  const MetricFn metric = [&](const InnerVariable& w, const OuterVariable&) {
    ++calls;
    return w(0);
  };
  std::vector<std::size_t> streamed;
  RunOptions opts;
  opts.on_record = [&](const TraceRecord& r) { streamed.push_back(r.iter); };
  const ExperimentTrace trace = run_model(*p, scalar(1.0), config(0.1, 10, 4, 0.5), metric, opts);
  EXPECT_EQ(calls, 4);
  EXPECT_EQ(streamed, (std::vector<std::size_t>{0, 1, 2, 3}));
  for (const auto& r : trace.records) EXPECT_TRUE(r.metric.has_value());
}

TEST(RunModel, RejectsWrongLambdaLength) {
  const auto p = make_closedform_quadratic();
  EXPECT_THROW(run_model(*p, Vector::Zero(2), config(0.1, 5, 2, 0.5)), Error);
}

TEST(RunModel, DivergencePropagatesOuterIteration) {
  const auto p = make_closedform_quadratic();
  // η far beyond 2/c² makes λ blow up.
  try {
    run_model(*p, scalar(1.0), config(0.1, 100, 2000, 1e6));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOracleDivergence);
    EXPECT_NE(std::string(e.what()).find("outer iteration"), std::string::npos);
  }
}

TEST(RunModel, Deterministic) {
  const auto p = testing::small_hyperclean(3, 10, 3);
  SolveConfig cfg = config(0.05, 30, 6, 0.5);
  cfg.seed = 99;
  RunOptions opts;
  opts.record_timing = false;
  const MetricFn metric = [&](const InnerVariable& w, const OuterVariable&) {
    return p->accuracy(p->val(), w);
  };
  const Vector l0 = Vector::Zero(p->dims().outer);
  expect_same_trace(run_model(*p, l0, cfg, metric, opts), run_model(*p, l0, cfg, metric, opts));
  for (const auto& r : run_model(*p, l0, cfg, metric, opts).records) EXPECT_EQ(r.wall_ms, 0.0);
}

TEST(RunAblation, FrequencyOneIsImprovedModel) {
  const auto p = make_degenerate_quadratic();
  const SolveConfig cfg = config(0.1, 200, 5, 0.5);
  RunOptions opts;
  opts.record_timing = false;
  const auto traces = run_ablation(*p, scalar(1.0), cfg, {1}, {}, opts);
  ASSERT_EQ(traces.size(), 1u);
  expect_same_trace(traces[0], run_model(*p, scalar(1.0), cfg, {}, opts));
}

TEST(RunAblation, FrequencyBeyondKIsBasicModel) {
  const auto p = make_degenerate_quadratic();
  const SolveConfig cfg = config(0.1, 200, 5, 0.5);
  SolveConfig basic = cfg;
  basic.mode = Mode::kBasic;
  RunOptions opts;
  opts.record_timing = false;
  const auto traces = run_ablation(*p, scalar(1.0), cfg, {cfg.K + 1, kNeverBigsam}, {}, opts);
  const ExperimentTrace reference = run_model(*p, scalar(1.0), basic, {}, opts);
  expect_same_trace(traces[0], reference);
  expect_same_trace(traces[1], reference);
}

TEST(RunAblation, RequiresImprovedBase) {
  const auto p = make_degenerate_quadratic();
  SolveConfig cfg = config(0.1, 10, 2, 0.5);
  cfg.mode = Mode::kBasic;
  EXPECT_THROW(run_ablation(*p, scalar(1.0), cfg, {1}), Error);
}

TEST(ModelProperties, UnrolledMinimumApproachesTrueMinimum) {
  // Grid over λ ∈ [−2, 2]; min f = 0 at λ = 0.
  const auto p = make_closedform_quadratic();
  double previous = INFINITY;
  for (std::size_t K : {10u, 100u, 1000u}) {
    InnerSolveSpec spec;
    spec.K = K;
    spec.t = spec.s = 0.1;
    double best = INFINITY;
    for (int i = 0; i <= 40; ++i) {
      const double l = -2.0 + 0.1 * i;
      best = std::min(best, unrolled_objective(*p, scalar(l), spec, Mode::kImproved));
    }
    const double gap = std::abs(best - ClosedFormQuadratic::kMinF);
    EXPECT_LE(gap, previous) << "K=" << K;
    previous = gap;
  }
  EXPECT_LE(previous, 1e-3);
}

TEST(ModelProperties, ImprovedNoWorseThanBasicOnZoo) {
  struct Case {
    std::unique_ptr<BilevelProblem> problem;
    Vector lambda0;
    SolveConfig cfg;
  };
  std::vector<Case> cases;
  cases.push_back({make_closedform_quadratic(), scalar(2.0), config(0.5, 100, 200, 1.0)});
  cases.push_back({make_degenerate_quadratic(), scalar(1.0), config(0.1, 1000, 50, 0.5)});
  auto hc = testing::small_hyperclean(1, 20, 4);
  const Dims hc_dims = hc->dims();
  cases.push_back({std::move(hc), Vector::Zero(hc_dims.outer), config(0.05, 200, 200, 0.5)});
  auto hr = testing::small_hyperrep(1);
  const Dims hr_dims = hr->dims();
  cases.push_back({std::move(hr), random_unit_ball(hr_dims.outer, 1, "zoo/lambda0", 0),
                   config(0.05, 200, 200, 0.05)});
  for (auto& c : cases) {
    SolveConfig basic = c.cfg;
    basic.mode = Mode::kBasic;
    const double f_improved = run_model(*c.problem, c.lambda0, c.cfg).records.back().outer_value;
    const double f_basic = run_model(*c.problem, c.lambda0, basic).records.back().outer_value;
    EXPECT_LE(f_improved, f_basic + 1e-6) << c.problem->name();
  }
}

TEST(ModelProperties, UniqueMinimizerCollapseClosedForm) {
  const auto p = make_closedform_quadratic();
  SolveConfig cfg = config(0.5, 100, 200, 1.0);
  const double f_improved = run_model(*p, scalar(2.0), cfg).records.back().outer_value;
  cfg.mode = Mode::kBasic;
  const double f_basic = run_model(*p, scalar(2.0), cfg).records.back().outer_value;
  EXPECT_NEAR(f_improved, f_basic, 1e-4);
}

TEST(ModelProperties, UniqueMinimizerCollapseGenericQuadratic) {
  // With α_k → 0 weighting the h-step, the averaged iterate leaves argmin h
  // and drifts toward argmin g, so the two models do not coincide here.
  const auto p = strongly_convex_quadratic();
  SolveConfig cfg = config(0.1, 1000, 300, 0.5);
  const double f_improved = run_model(*p, Vector::Zero(1), cfg).records.back().outer_value;
  cfg.mode = Mode::kBasic;
  const double f_basic = run_model(*p, Vector::Zero(1), cfg).records.back().outer_value;
  EXPECT_NEAR(f_improved, f_basic, 1e-4);
}

}  // namespace
}  // namespace bilevel
