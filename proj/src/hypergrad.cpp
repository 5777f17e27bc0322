#include "bilevel/hypergrad.hpp"

#include "bilevel/error.hpp"

#include <string>

namespace bilevel {

Hypergradient reverse_hypergradient(const BilevelProblem& problem, const Tape& tape,
                                    ReverseBound bound) {
  const Dims d = problem.dims();
  const bool shape_ok =
      !tape.iterates.empty() && tape.iterates.size() == tape.alphas.size() + 1 &&
      static_cast<std::size_t>(tape.lambda_at_record.size()) == d.outer &&
      static_cast<std::size_t>(tape.iterates.front().size()) == d.inner;
  if (!shape_ok) {
    throw Error(ErrorCode::kTapeMismatch,
                "tape does not match problem '" + problem.name() + "' (n=" +
                    std::to_string(d.inner) + ", m=" + std::to_string(d.outer) + ")");
  }

  const OuterVariable& lambda = tape.lambda_at_record;
  const InnerVariable& omega_hat = tape.final();
  Hypergradient out;
  Vector adjoint = problem.grad1_g(omega_hat, lambda);
  out.values = problem.grad2_g(omega_hat, lambda);

  const std::size_t K = tape.steps();
  const std::size_t lowest = bound == ReverseBound::kAllTransitions ? 0 : 1;
  for (std::size_t k = K; k-- > lowest;) {
    const StepParams p{tape.t, tape.s, tape.alphas[k]};
    const InnerVariable& omega_k = tape.iterates[k];
    out.values += vjp_phi_lambda(problem, adjoint, omega_k, lambda, p);
    adjoint = vjp_phi_omega(problem, adjoint, omega_k, lambda, p);
    ++out.vjp_pairs;
  }
  return out;
}

double unrolled_objective(const BilevelProblem& problem, const OuterVariable& lambda,
                          const InnerSolveSpec& spec, Mode mode) {
  const Tape tape = solve_inner(problem, lambda, spec, mode);
  return problem.g_value(tape.final(), lambda);
}

Hypergradient hypergradient_fd_oracle(const BilevelProblem& problem, const OuterVariable& lambda,
                                      const InnerSolveSpec& spec, Mode mode, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eps must be positive");
  InnerSolveSpec pinned = spec;
  if (!pinned.omega0) pinned.omega0 = problem.initial_inner();

  Hypergradient out;
  out.values.resize(lambda.size());
  OuterVariable shifted = lambda;
  for (Eigen::Index j = 0; j < lambda.size(); ++j) {
    const double saved = shifted(j);
    shifted(j) = saved + eps;
    const double up = unrolled_objective(problem, shifted, pinned, mode);
    shifted(j) = saved - eps;
    const double down = unrolled_objective(problem, shifted, pinned, mode);
    shifted(j) = saved;
    out.values(j) = (up - down) / (2.0 * eps);
  }
  return out;
}

}  // namespace bilevel
