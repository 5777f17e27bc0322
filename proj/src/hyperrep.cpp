#include "bilevel/problems.hpp"

#include "bilevel/error.hpp"
#include "softmax.hpp"

#include <string>

namespace bilevel {

HyperrepProblem::HyperrepProblem(std::vector<Episode> tasks, int num_classes, std::size_t rank,
                                 double ridge)
    : tasks_(std::move(tasks)), classes_(num_classes), rank_(rank), ridge_(ridge) {
  if (tasks_.empty()) throw Error(ErrorCode::kBadEpisode, "no tasks");
  if (rank_ < 1) throw Error(ErrorCode::kInvalidArgument, "rank must be >= 1");
  if (classes_ < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one class");
  const Episode& first = tasks_.front();
  feature_dim_ = static_cast<std::size_t>(first.train.X.cols());
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const Episode& e = tasks_[i];
    const bool same_shape = e.train.X.rows() == first.train.X.rows() &&
                            e.val.X.rows() == first.val.X.rows() &&
                            static_cast<std::size_t>(e.train.X.cols()) == feature_dim_ &&
                            static_cast<std::size_t>(e.val.X.cols()) == feature_dim_ &&
                            e.train.y.size() == static_cast<std::size_t>(e.train.X.rows()) &&
                            e.val.y.size() == static_cast<std::size_t>(e.val.X.rows());
    if (!same_shape) {
      throw Error(ErrorCode::kBadEpisode, "task " + std::to_string(i) + " has a different shape");
    }
    for (const auto* ys : {&e.train.y, &e.val.y}) {
      for (int label : *ys) {
        if (label < 0 || label >= classes_) {
          throw Error(ErrorCode::kBadLabel,
                      "task " + std::to_string(i) + " has label " + std::to_string(label));
        }
      }
    }
  }
  dims_ = {tasks_.size() * rank_ * static_cast<std::size_t>(classes_), feature_dim_ * rank_};
}

double HyperrepProblem::task_loss(std::size_t task, bool validation, const Vector& omega,
                                  const Vector& lambda) const {
  const auto d = static_cast<Eigen::Index>(feature_dim_);
  const auto r = static_cast<Eigen::Index>(rank_);
  const Eigen::Index block = r * classes_;
  const auto P = detail::as_matrix(lambda, d, r);
  const Vector head = omega.segment(static_cast<Eigen::Index>(task) * block, block);
  const auto W = detail::as_matrix(head, r, classes_);
  const LabeledSet& set = validation ? tasks_[task].val : tasks_[task].train;
  return detail::xent_rows(set.X * P * W, set.y).sum();
}

double HyperrepProblem::h_value(const Vector& omega, const Vector& lambda) const {
  double total = 0.0;
  for (std::size_t i = 0; i < tasks_.size(); ++i) total += task_loss(i, false, omega, lambda);
  return total;
}

double HyperrepProblem::g_value(const Vector& omega, const Vector& lambda) const {
  double total = 0.0;
  for (std::size_t i = 0; i < tasks_.size(); ++i) total += task_loss(i, true, omega, lambda);
  return total + ridge_ * omega.squaredNorm();
}

Vector HyperrepProblem::objective_grad1(bool validation, const Vector& omega,
                                        const Vector& lambda) const {
  const auto d = static_cast<Eigen::Index>(feature_dim_);
  const auto r = static_cast<Eigen::Index>(rank_);
  const Eigen::Index block = r * classes_;
  const auto P = detail::as_matrix(lambda, d, r);
  Vector out(omega.size());
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const LabeledSet& set = validation ? tasks_[i].val : tasks_[i].train;
    const auto offset = static_cast<Eigen::Index>(i) * block;
    const Vector head = omega.segment(offset, block);
    const auto W = detail::as_matrix(head, r, classes_);
    const Matrix F = set.X * P;
    const Matrix R = detail::xent_residual(detail::softmax_rows(F * W), set.y);
    out.segment(offset, block) = detail::flatten(F.transpose() * R);
  }
  return out;
}

Vector HyperrepProblem::objective_vjp11(bool validation, const Vector& a, const Vector& omega,
                                        const Vector& lambda) const {
  const auto d = static_cast<Eigen::Index>(feature_dim_);
  const auto r = static_cast<Eigen::Index>(rank_);
  const Eigen::Index block = r * classes_;
  const auto P = detail::as_matrix(lambda, d, r);
  Vector out(omega.size());
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const LabeledSet& set = validation ? tasks_[i].val : tasks_[i].train;
    const auto offset = static_cast<Eigen::Index>(i) * block;
    const Vector head = omega.segment(offset, block);
    const Vector adj = a.segment(offset, block);
    const auto W = detail::as_matrix(head, r, classes_);
    const auto A = detail::as_matrix(adj, r, classes_);
    const Matrix F = set.X * P;
    const Matrix H = detail::xent_hessian_apply(detail::softmax_rows(F * W), F * A);
    out.segment(offset, block) = detail::flatten(F.transpose() * H);
  }
  return out;
}

// ∇_P ⟨A, ∇_W l⟩ = Xᵀ R Aᵀ + Xᵀ Hess(X P A) Wᵀ, summed over tasks.
Vector HyperrepProblem::objective_vjp12(bool validation, const Vector& a, const Vector& omega,
                                        const Vector& lambda) const {
  const auto d = static_cast<Eigen::Index>(feature_dim_);
  const auto r = static_cast<Eigen::Index>(rank_);
  const Eigen::Index block = r * classes_;
  const auto P = detail::as_matrix(lambda, d, r);
  Matrix acc = Matrix::Zero(d, r);
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const LabeledSet& set = validation ? tasks_[i].val : tasks_[i].train;
    const auto offset = static_cast<Eigen::Index>(i) * block;
    const Vector head = omega.segment(offset, block);
    const Vector adj = a.segment(offset, block);
    const auto W = detail::as_matrix(head, r, classes_);
    const auto A = detail::as_matrix(adj, r, classes_);
    const Matrix F = set.X * P;
    const Matrix Psoft = detail::softmax_rows(F * W);
    const Matrix R = detail::xent_residual(Psoft, set.y);
    const Matrix H = detail::xent_hessian_apply(Psoft, F * A);
    acc += set.X.transpose() * (R * A.transpose() + H * W.transpose());
  }
  return detail::flatten(acc);
}

Vector HyperrepProblem::grad1_h(const Vector& omega, const Vector& lambda) const {
  return objective_grad1(false, omega, lambda);
}

Vector HyperrepProblem::grad1_g(const Vector& omega, const Vector& lambda) const {
  return objective_grad1(true, omega, lambda) + 2.0 * ridge_ * omega;
}

Vector HyperrepProblem::grad2_g(const Vector& omega, const Vector& lambda) const {
  const auto d = static_cast<Eigen::Index>(feature_dim_);
  const auto r = static_cast<Eigen::Index>(rank_);
  const Eigen::Index block = r * classes_;
  const auto P = detail::as_matrix(lambda, d, r);
  Matrix acc = Matrix::Zero(d, r);
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const LabeledSet& set = tasks_[i].val;
    const Vector head = omega.segment(static_cast<Eigen::Index>(i) * block, block);
    const auto W = detail::as_matrix(head, r, classes_);
    const Matrix R = detail::xent_residual(detail::softmax_rows(set.X * P * W), set.y);
    acc += set.X.transpose() * R * W.transpose();
  }
  return detail::flatten(acc);
}

Vector HyperrepProblem::vjp11_h(const Vector& a, const Vector& omega,
                                const Vector& lambda) const {
  return objective_vjp11(false, a, omega, lambda);
}

Vector HyperrepProblem::vjp12_h(const Vector& a, const Vector& omega,
                                const Vector& lambda) const {
  return objective_vjp12(false, a, omega, lambda);
}

Vector HyperrepProblem::vjp11_g(const Vector& a, const Vector& omega,
                                const Vector& lambda) const {
  return objective_vjp11(true, a, omega, lambda) + 2.0 * ridge_ * a;
}

Vector HyperrepProblem::vjp12_g(const Vector& a, const Vector& omega,
                                const Vector& lambda) const {
  return objective_vjp12(true, a, omega, lambda);
}

double HyperrepProblem::val_accuracy(const Vector& omega, const Vector& lambda) const {
  const auto d = static_cast<Eigen::Index>(feature_dim_);
  const auto r = static_cast<Eigen::Index>(rank_);
  const Eigen::Index block = r * classes_;
  const auto P = detail::as_matrix(lambda, d, r);
  double total = 0.0;
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const LabeledSet& set = tasks_[i].val;
    const Vector head = omega.segment(static_cast<Eigen::Index>(i) * block, block);
    const Matrix Z = set.X * P * detail::as_matrix(head, r, classes_);
    std::size_t hits = 0;
    for (Eigen::Index j = 0; j < Z.rows(); ++j) {
      Eigen::Index best = 0;
      Z.row(j).maxCoeff(&best);
      if (best == set.y[static_cast<std::size_t>(j)]) ++hits;
    }
    total += set.y.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(set.y.size());
  }
  return total / static_cast<double>(tasks_.size());
}

}  // namespace bilevel
