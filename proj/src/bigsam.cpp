#include "bilevel/bigsam.hpp"

#include "bilevel/error.hpp"

#include <cmath>
#include <string>

namespace bilevel {

void StepParams::validate() const {
  if (!(t > 0.0)) throw Error(ErrorCode::kInvalidArgument, "step size t must be positive");
  if (!(s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "step size s must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 1]");
  }
}

double alpha_schedule(std::uint64_t k, double exponent) {
  if (k == 0) {
    throw Error(ErrorCode::kInvalidIterationIndex, "alpha schedule is 1-based, got k = 0");
  }
  return std::min(1.0, std::pow(static_cast<double>(k), -exponent));
}

namespace {

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw Error(ErrorCode::kOracleDivergence, std::string("non-finite ") + what);
}

template <typename GradH, typename GradG>
InnerVariable averaged_step(const InnerVariable& omega, GradH&& grad_h, GradG&& grad_g,
                            const StepParams& p) {
  const Vector gh = grad_h(omega);
  require_finite(gh, "grad1_h");
  InnerVariable theta = omega - p.t * gh;
  if (p.alpha == 1.0) return theta;
  const Vector gg = grad_g(omega);
  require_finite(gg, "grad1_g");
  const InnerVariable phi = omega - p.s * gg;
  return p.alpha * theta + (1.0 - p.alpha) * phi;
}

void check_dims(const BilevelProblem& problem, const Vector& omega, const Vector& lambda) {
  const Dims d = problem.dims();
  if (static_cast<std::size_t>(omega.size()) != d.inner ||
      static_cast<std::size_t>(lambda.size()) != d.outer) {
    throw Error(ErrorCode::kDimensionMismatch,
                problem.name() + ": expected (n, m) = (" + std::to_string(d.inner) + ", " +
                    std::to_string(d.outer) + "), got (" + std::to_string(omega.size()) + ", " +
                    std::to_string(lambda.size()) + ")");
  }
}

}  // namespace

InnerVariable bigsam_step(const BilevelProblem& problem, const InnerVariable& omega,
                          const OuterVariable& lambda, const StepParams& p) {
  check_dims(problem, omega, lambda);
  return averaged_step(
      omega, [&](const Vector& w) { return problem.grad1_h(w, lambda); },
      [&](const Vector& w) { return problem.grad1_g(w, lambda); }, p);
}

Vector vjp_phi_omega(const BilevelProblem& problem, const Vector& a, const InnerVariable& omega,
                     const OuterVariable& lambda, const StepParams& p) {
  const Vector h11 = problem.vjp11_h(a, omega, lambda);
  require_finite(h11, "vjp11_h");
  Vector out = a - (p.t * p.alpha) * h11;
  if (p.alpha == 1.0) return out;
  const Vector g11 = problem.vjp11_g(a, omega, lambda);
  require_finite(g11, "vjp11_g");
  out -= (p.s * (1.0 - p.alpha)) * g11;
  return out;
}

Vector vjp_phi_lambda(const BilevelProblem& problem, const Vector& a, const InnerVariable& omega,
                      const OuterVariable& lambda, const StepParams& p) {
  const Vector h12 = problem.vjp12_h(a, omega, lambda);
  require_finite(h12, "vjp12_h");
  Vector out = -(p.t * p.alpha) * h12;
  if (p.alpha == 1.0) return out;
  const Vector g12 = problem.vjp12_g(a, omega, lambda);
  require_finite(g12, "vjp12_g");
  out -= (p.s * (1.0 - p.alpha)) * g12;
  return out;
}

double step_alpha(std::size_t k, const InnerSolveSpec& spec, Mode mode) {
  if (mode == Mode::kBasic) return 1.0;
  if (k % spec.bigsam_frequency != 0) return 1.0;
  return alpha_schedule(k + 1, spec.alpha_exponent);
}

Tape solve_inner(const BilevelProblem& problem, const OuterVariable& lambda,
                 const InnerSolveSpec& spec, Mode mode) {
  if (spec.bigsam_frequency == 0) {
    throw Error(ErrorCode::kInvalidArgument, "bigsam_frequency must be >= 1");
  }
  Tape tape;
  tape.t = spec.t;
  tape.s = spec.s;
  tape.mode = mode;
  tape.lambda_at_record = lambda;
  tape.iterates.reserve(spec.K + 1);
  tape.alphas.reserve(spec.K);
  tape.iterates.push_back(spec.omega0 ? *spec.omega0 : problem.initial_inner());
  check_dims(problem, tape.iterates.front(), lambda);

  for (std::size_t k = 0; k < spec.K; ++k) {
    const StepParams p{spec.t, spec.s, step_alpha(k, spec, mode)};
    try {
      tape.iterates.push_back(bigsam_step(problem, tape.iterates.back(), lambda, p));
    } catch (const Error& e) {
      throw Error(e.code(), "inner step " + std::to_string(k) + ": " + e.detail());
    }
    tape.alphas.push_back(p.alpha);
    if (p.alpha != 1.0) ++tape.g_gradient_calls;
  }
  return tape;
}

InnerVariable bigsam_standalone(const SingleLevelOracle& h, const SingleLevelOracle& g,
                                const InnerVariable& omega0, std::size_t K, double t, double s,
                                double alpha_exponent) {
  InnerVariable omega = omega0;
  for (std::size_t k = 0; k < K; ++k) {
    const StepParams p{t, s, alpha_schedule(k + 1, alpha_exponent)};
    omega = averaged_step(omega, h.gradient, g.gradient, p);
  }
  return omega;
}

}  // namespace bilevel
