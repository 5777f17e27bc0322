#include "bilevel/problems.hpp"

#include "bilevel/error.hpp"
#include "softmax.hpp"

#include <cmath>
#include <string>

namespace bilevel {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_labels(const LabeledSet& set, int classes, const char* which) {
  if (static_cast<std::size_t>(set.X.rows()) != set.y.size()) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(which) + ": rows != labels");
  }
  for (std::size_t i = 0; i < set.y.size(); ++i) {
    if (set.y[i] < 0 || set.y[i] >= classes) {
      throw Error(ErrorCode::kBadLabel, std::string(which) + " sample " + std::to_string(i) +
                                            " has label " + std::to_string(set.y[i]));
    }
  }
}

}  // namespace

double softmax_xent_sum(const Matrix& X, const std::vector<int>& y, const Matrix& W) {
  return detail::xent_rows(X * W, y).sum();
}

HypercleanProblem::HypercleanProblem(LabeledSet train, LabeledSet val, int num_classes,
                                     double ridge)
    : train_(std::move(train)), val_(std::move(val)), classes_(num_classes), ridge_(ridge) {
  if (classes_ < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one class");
  if (train_.X.cols() != val_.X.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "train/val feature dimensions differ");
  }
  if (train_.X.rows() < 1) throw Error(ErrorCode::kInvalidArgument, "empty training set");
  check_labels(train_, classes_, "train");
  check_labels(val_, classes_, "val");
  dims_ = {static_cast<std::size_t>(train_.X.cols() * classes_),
           static_cast<std::size_t>(train_.X.rows())};
}

double HypercleanProblem::h_value(const Vector& omega, const Vector& lambda) const {
  const Vector losses = train_losses(omega);
  double total = 0.0;
  for (Eigen::Index i = 0; i < losses.size(); ++i) total += sigmoid(lambda(i)) * losses(i);
  return total;
}

double HypercleanProblem::g_value(const Vector& omega, const Vector&) const {
  const auto W = detail::as_matrix(omega, val_.X.cols(), classes_);
  return detail::xent_rows(val_.X * W, val_.y).sum() + ridge_ * omega.squaredNorm();
}

Vector HypercleanProblem::train_losses(const Vector& omega) const {
  const auto W = detail::as_matrix(omega, train_.X.cols(), classes_);
  return detail::xent_rows(train_.X * W, train_.y);
}

Vector HypercleanProblem::grad1_h(const Vector& omega, const Vector& lambda) const {
  const auto W = detail::as_matrix(omega, train_.X.cols(), classes_);
  Matrix R = detail::xent_residual(detail::softmax_rows(train_.X * W), train_.y);
  for (Eigen::Index i = 0; i < R.rows(); ++i) R.row(i) *= sigmoid(lambda(i));
  return detail::flatten(train_.X.transpose() * R);
}

Vector HypercleanProblem::grad2_h(const Vector& omega, const Vector& lambda) const {
  const Vector losses = train_losses(omega);
  Vector out(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double s = sigmoid(lambda(i));
    out(i) = s * (1.0 - s) * losses(i);
  }
  return out;
}

Vector HypercleanProblem::grad1_g(const Vector& omega, const Vector&) const {
  const auto W = detail::as_matrix(omega, val_.X.cols(), classes_);
  const Matrix R = detail::xent_residual(detail::softmax_rows(val_.X * W), val_.y);
  return detail::flatten(val_.X.transpose() * R) + 2.0 * ridge_ * omega;
}

Vector HypercleanProblem::grad2_g(const Vector&, const Vector& lambda) const {
  return Vector::Zero(lambda.size());
}

Vector HypercleanProblem::vjp11_h(const Vector& a, const Vector& omega,
                                  const Vector& lambda) const {
  const Eigen::Index d = train_.X.cols();
  const auto W = detail::as_matrix(omega, d, classes_);
  const auto A = detail::as_matrix(a, d, classes_);
  const Matrix P = detail::softmax_rows(train_.X * W);
  Matrix H = detail::xent_hessian_apply(P, train_.X * A);
  for (Eigen::Index i = 0; i < H.rows(); ++i) H.row(i) *= sigmoid(lambda(i));
  return detail::flatten(train_.X.transpose() * H);
}

Vector HypercleanProblem::vjp12_h(const Vector& a, const Vector& omega,
                                  const Vector& lambda) const {
  const Eigen::Index d = train_.X.cols();
  const auto W = detail::as_matrix(omega, d, classes_);
  const auto A = detail::as_matrix(a, d, classes_);
  const Matrix R = detail::xent_residual(detail::softmax_rows(train_.X * W), train_.y);
  const Matrix XA = train_.X * A;
  Vector out(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double s = sigmoid(lambda(i));
    out(i) = s * (1.0 - s) * XA.row(i).dot(R.row(i));
  }
  return out;
}

Vector HypercleanProblem::vjp11_g(const Vector& a, const Vector& omega, const Vector&) const {
  const Eigen::Index d = val_.X.cols();
  const auto W = detail::as_matrix(omega, d, classes_);
  const auto A = detail::as_matrix(a, d, classes_);
  const Matrix P = detail::softmax_rows(val_.X * W);
  const Matrix H = detail::xent_hessian_apply(P, val_.X * A);
  return detail::flatten(val_.X.transpose() * H) + 2.0 * ridge_ * a;
}

Vector HypercleanProblem::vjp12_g(const Vector&, const Vector&, const Vector& lambda) const {
  return Vector::Zero(lambda.size());
}

double HypercleanProblem::accuracy(const LabeledSet& set, const Vector& omega) const {
  if (set.y.empty()) return 0.0;
  const auto W = detail::as_matrix(omega, set.X.cols(), classes_);
  const Matrix Z = set.X * W;
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    Eigen::Index best = 0;
    Z.row(i).maxCoeff(&best);
    if (best == set.y[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(set.y.size());
}

}  // namespace bilevel
