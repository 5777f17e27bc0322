#include "bilevel/error.hpp"
#include "bilevel/hypergrad.hpp"
#include "bilevel/oracles.hpp"
#include "bilevel/problems.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace bilevel {
namespace {

using testing::scalar;

InnerSolveSpec spec_for(std::size_t K, double step) {
  InnerSolveSpec spec;
  spec.K = K;
  spec.t = spec.s = step;
  return spec;
}

struct ZooEntry {
  std::unique_ptr<BilevelProblem> problem;
  double step;
};

std::vector<ZooEntry> zoo() {
  std::vector<ZooEntry> out;
  out.push_back({make_closedform_quadratic(), 0.1});
  out.push_back({make_degenerate_quadratic(), 0.1});
  out.push_back({testing::small_hyperclean(11, 8, 3), 0.05});
  out.push_back({testing::small_hyperrep(11, 2, 2), 0.05});
  return out;
}

TEST(ReverseHypergradient, MatchesFiniteDifferencesOfUnrolledObjective) {
  for (const auto& [p, step] : zoo()) {
    const Dims d = p->dims();
    for (Mode mode : {Mode::kImproved, Mode::kBasic}) {
      for (std::size_t K : {5u, 50u, 500u}) {
        for (std::uint64_t i = 0; i < 3; ++i) {
          const Vector l = random_unit_ball(d.outer, 23, "hg/lambda", i);
          const InnerSolveSpec spec = spec_for(K, step);
          const Hypergradient reverse =
              reverse_hypergradient(*p, solve_inner(*p, l, spec, mode));
          const Hypergradient fd =
              hypergradient_fd_oracle(*p, l, spec, mode, default_fd_step(l));
          EXPECT_LE(norm_rel_error(reverse.values, fd.values, 1e-10), 1e-4)
              << p->name() << " " << to_string(mode) << " K=" << K << " point " << i;
        }
      }
    }
  }
}

TEST(ReverseHypergradient, ClosedFormIsQuadraticInLambda) {
  // ω_K is linear in λ, ω_K = c·λ, so f_K = ½c²λ² and G = c²λ exactly.
  const auto p = make_closedform_quadratic();
  const InnerSolveSpec spec = spec_for(2000, 0.1);
  for (Mode mode : {Mode::kImproved, Mode::kBasic}) {
    const double c = solve_inner(*p, scalar(1.0), spec, mode).final()(0);
    const double G = reverse_hypergradient(*p, solve_inner(*p, scalar(2.0), spec, mode)).values(0);
    EXPECT_NEAR(G, c * c * 2.0, 1e-12) << to_string(mode);
  }
  // Basic mode is plain gradient descent: c = 1 − (1 − t)^K.
  const double c_basic = 1.0 - std::pow(0.9, 2000);
  const double G_basic =
      reverse_hypergradient(*p, solve_inner(*p, scalar(2.0), spec, Mode::kBasic)).values(0);
  EXPECT_NEAR(G_basic, 2.0 * c_basic * c_basic, 1e-12);
}

TEST(ReverseHypergradient, ZeroAtClosedFormOptimum) {
  const auto p = make_closedform_quadratic();
  for (Mode mode : {Mode::kImproved, Mode::kBasic}) {
    const Tape tape = solve_inner(*p, scalar(0.0), spec_for(50, 0.1), mode);
    EXPECT_EQ(reverse_hypergradient(*p, tape).values(0), 0.0);
  }
}

TEST(ReverseHypergradient, SingleStepSkipFirstIsDirectGradient) {
  const auto p = testing::small_hyperrep(4, 2, 2);
  const Vector l = random_unit_ball(p->dims().outer, 4, "direct", 0);
  const Tape tape = solve_inner(*p, l, spec_for(1, 0.05), Mode::kImproved);
  const Hypergradient hg = reverse_hypergradient(*p, tape, ReverseBound::kSkipFirstTransition);
  EXPECT_EQ(hg.vjp_pairs, 0u);
  EXPECT_EQ(hg.values, p->grad2_g(tape.final(), l));
}

TEST(ReverseHypergradient, OperationCount) {
  const auto base = make_degenerate_quadratic();
  for (std::size_t K : {1u, 7u, 40u}) {
    const testing::CountingProblem p(*base);
    const Tape tape = solve_inner(p, scalar(0.4), spec_for(K, 0.1), Mode::kImproved);
    const Hypergradient all = reverse_hypergradient(p, tape);
    EXPECT_EQ(all.vjp_pairs, K);
    EXPECT_EQ(p.vjp11_h_calls.load(), static_cast<int>(K));
    EXPECT_EQ(p.vjp12_h_calls.load(), static_cast<int>(K));
    const Hypergradient skip = reverse_hypergradient(p, tape, ReverseBound::kSkipFirstTransition);
    EXPECT_EQ(skip.vjp_pairs, K - 1);
  }
}

TEST(ReverseHypergradient, SkippingFirstTransitionLosesAccuracy) {
  // ω_1 = tλ depends on λ; dropping that transition biases G at small K.
  const auto p = make_closedform_quadratic();
  const InnerSolveSpec spec = spec_for(5, 0.1);
  const Tape tape = solve_inner(*p, scalar(1.0), spec, Mode::kBasic);
  const double fd = hypergradient_fd_oracle(*p, scalar(1.0), spec, Mode::kBasic, 1e-5).values(0);
  const double all = reverse_hypergradient(*p, tape).values(0);
  const double skip = reverse_hypergradient(*p, tape, ReverseBound::kSkipFirstTransition).values(0);
  EXPECT_NEAR(all, fd, 1e-8);
  EXPECT_GT(std::abs(skip - fd), 1e-2);
}

TEST(ReverseHypergradient, BasicEqualsImprovedWithZeroExponent) {
  for (const auto& [p, step] : zoo()) {
    InnerSolveSpec spec = spec_for(30, step);
    spec.alpha_exponent = 0.0;
    const Vector l = random_unit_ball(p->dims().outer, 5, "reduce", 0);
    const Vector improved =
        reverse_hypergradient(*p, solve_inner(*p, l, spec, Mode::kImproved)).values;
    const Vector basic = reverse_hypergradient(*p, solve_inner(*p, l, spec, Mode::kBasic)).values;
    EXPECT_EQ(improved, basic) << p->name();
  }
}

TEST(ReverseHypergradient, BasicModeIsLinearInOuterObjective) {
  // In basic mode g only enters through the terminal adjoint, so scaling it
  // by 2 scales G by exactly 2.
  for (const auto& [p, step] : zoo()) {
    const testing::ScaledGProblem doubled(*p, 2.0);
    const Vector l = random_unit_ball(p->dims().outer, 6, "scale", 0);
    const InnerSolveSpec spec = spec_for(25, step);
    const Vector once = reverse_hypergradient(*p, solve_inner(*p, l, spec, Mode::kBasic)).values;
    const Vector twice =
        reverse_hypergradient(doubled, solve_inner(doubled, l, spec, Mode::kBasic)).values;
    EXPECT_EQ(twice, Vector(2.0 * once)) << p->name();
  }
}

TEST(ReverseHypergradient, ConstantOuterObjectiveGivesZero) {
  testing::FunctionProblem p(
      2, 2, [](const Vector&, const Vector&) { return 4.0; },
      [](const Vector& w, const Vector& l) { return 0.5 * (w - l).squaredNorm(); },
      [](const Vector&, const Vector&) { return Vector::Zero(2); },
      [](const Vector&, const Vector&) { return Vector::Zero(2); },
      [](const Vector& w, const Vector& l) -> Vector { return w - l; });
  for (Mode mode : {Mode::kImproved, Mode::kBasic}) {
    const Tape tape = solve_inner(p, Eigen::Vector2d(0.3, -0.8), spec_for(20, 0.1), mode);
    EXPECT_EQ(reverse_hypergradient(p, tape).values, Vector::Zero(2));
  }
}

TEST(ReverseHypergradient, RejectsForeignTape) {
  const auto deg = make_degenerate_quadratic();
  const auto cf = make_closedform_quadratic();
  const Tape tape = solve_inner(*cf, scalar(1.0), spec_for(3, 0.1), Mode::kBasic);
  try {
    reverse_hypergradient(*deg, tape);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTapeMismatch);
  }
}

TEST(ReverseHypergradient, FdFallbackProblemAgreesWithAnalytic) {
  const auto p = testing::small_hyperclean(12, 6, 3);
  const testing::FdOnlyProblem fd(*p);
  const Vector l = random_unit_ball(p->dims().outer, 12, "fallback", 0);
  const InnerSolveSpec spec = spec_for(20, 0.05);
  const Vector analytic =
      reverse_hypergradient(*p, solve_inner(*p, l, spec, Mode::kImproved)).values;
  const Vector fallback =
      reverse_hypergradient(fd, solve_inner(fd, l, spec, Mode::kImproved)).values;
  EXPECT_LE(norm_rel_error(analytic, fallback, 1e-10), 1e-5);
}

}  // namespace
}  // namespace bilevel
