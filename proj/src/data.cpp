#include "bilevel/data.hpp"

#include "bilevel/error.hpp"
#include "bilevel/format.hpp"
#include "bilevel/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

namespace bilevel {

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.num_classes = num_classes;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.y.reserve(rows.size());
  out.mask.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    out.y.push_back(y[rows[i]]);
    out.mask.push_back(mask[rows[i]]);
  }
  return out;
}

namespace {

// First `count` entries of a uniformly random permutation of `items`.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> items, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(items.size() - i));
    std::swap(items[i], items[j]);
  }
  items.resize(count);
  return items;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

Dataset gen_synthetic(std::uint64_t seed, std::size_t n, std::size_t d, int num_classes,
                      double margin) {
  if (num_classes < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one class");
  if (n < static_cast<std::size_t>(num_classes)) {
    throw Error(ErrorCode::kTooFewSamples,
                std::to_string(n) + " samples for " + std::to_string(num_classes) + " classes");
  }
  if (!(margin > 0.0)) throw Error(ErrorCode::kInvalidArgument, "margin must be positive");
  if (d < 1) throw Error(ErrorCode::kInvalidArgument, "feature dimension must be >= 1");

  const auto C = static_cast<Eigen::Index>(num_classes);
  const auto dim = static_cast<Eigen::Index>(d);
  const double radius = margin / std::sqrt(2.0);
  Matrix centers = Matrix::Zero(C, dim);
  Rng center_rng = Rng::derive(seed, "gen_synthetic/centers");
  for (Eigen::Index c = 0; c < C; ++c) {
    if (C <= dim) {
      centers(c, c) = radius;
    } else {
      for (Eigen::Index j = 0; j < dim; ++j) centers(c, j) = center_rng.normal();
      centers.row(c) *= radius / centers.row(c).norm();
    }
  }

  Rng rng = Rng::derive(seed, "gen_synthetic/samples");
  Dataset ds;
  ds.num_classes = num_classes;
  ds.X.resize(static_cast<Eigen::Index>(n), dim);
  ds.y.resize(n);
  ds.mask.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    ds.y[i] = label;
    for (Eigen::Index j = 0; j < dim; ++j) {
      ds.X(static_cast<Eigen::Index>(i), j) = centers(label, j) + rng.normal();
    }
  }
  return ds;
}

Dataset corrupt_labels(const Dataset& ds, double rho, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "corruption rate must lie in [0, 1]");
  }
  const auto count = static_cast<std::size_t>(std::floor(rho * static_cast<double>(ds.size())));
  if (count > 0 && ds.num_classes < 2) {
    throw Error(ErrorCode::kCannotCorruptSingleClass, "a single-class dataset cannot be corrupted");
  }
  Dataset out = ds;
  Rng rng = Rng::derive(seed, "corrupt_labels");
  const auto chosen = sample_without_replacement(iota_indices(ds.size()), count, rng);
  const auto others = static_cast<std::uint64_t>(ds.num_classes - 1);
  for (std::size_t i : chosen) {
    const int shift = 1 + static_cast<int>(rng.below(others));
    out.y[i] = (ds.y[i] + shift) % ds.num_classes;
    out.mask[i] = true;
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, std::size_t n_tr, std::size_t n_val,
                                  std::uint64_t seed) {
  if (n_tr + n_val > ds.size()) {
    throw Error(ErrorCode::kSplitTooLarge, std::to_string(n_tr) + " + " + std::to_string(n_val) +
                                               " > " + std::to_string(ds.size()));
  }
  Rng rng = Rng::derive(seed, "split");
  const auto order = sample_without_replacement(iota_indices(ds.size()), n_tr + n_val, rng);
  const std::vector<std::size_t> tr(order.begin(), order.begin() + static_cast<long>(n_tr));
  const std::vector<std::size_t> val(order.begin() + static_cast<long>(n_tr), order.end());
  return {ds.subset(tr), ds.subset(val)};
}

EpisodeSet make_episodes(const Dataset& ds, std::size_t way, std::size_t shot,
                         std::size_t val_per_class, std::size_t n_tasks, std::uint64_t seed) {
  EpisodeSet set;
  set.way = way;
  set.shot = shot;
  set.val_per_class = val_per_class;
  if (n_tasks == 0) return set;
  if (way < 1) throw Error(ErrorCode::kEpisodeInfeasible, "way must be >= 1");

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.y[i])].push_back(i);
  std::vector<int> eligible;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].size() >= shot + val_per_class) eligible.push_back(static_cast<int>(c));
  }
  if (eligible.size() < way) {
    throw Error(ErrorCode::kEpisodeInfeasible,
                std::to_string(eligible.size()) + " classes have " +
                    std::to_string(shot + val_per_class) + " samples, need " + std::to_string(way));
  }

  const Eigen::Index d = ds.X.cols();
  for (std::size_t task = 0; task < n_tasks; ++task) {
    Rng rng = Rng::derive(seed, "make_episodes", task);
    const auto classes = sample_without_replacement(eligible, way, rng);
    Episode ep;
    ep.train.X.resize(static_cast<Eigen::Index>(way * shot), d);
    ep.val.X.resize(static_cast<Eigen::Index>(way * val_per_class), d);
    Eigen::Index tr_row = 0;
    Eigen::Index val_row = 0;
    for (std::size_t j = 0; j < way; ++j) {
      const auto& pool = by_class[static_cast<std::size_t>(classes[j])];
      const auto picked = sample_without_replacement(pool, shot + val_per_class, rng);
      for (std::size_t q = 0; q < picked.size(); ++q) {
        const auto src = static_cast<Eigen::Index>(picked[q]);
        if (q < shot) {
          ep.train.X.row(tr_row++) = ds.X.row(src);
          ep.train.y.push_back(static_cast<int>(j));
        } else {
          ep.val.X.row(val_row++) = ds.X.row(src);
          ep.val.y.push_back(static_cast<int>(j));
        }
      }
    }
    set.tasks.push_back(std::move(ep));
  }
  return set;
}

void write_csv(const Dataset& ds, std::ostream& out) {
  out << "index,label,corrupted";
  for (Eigen::Index j = 0; j < ds.X.cols(); ++j) out << ",feat_" << j;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << i << ',' << ds.y[i] << ',' << (ds.mask[i] ? 1 : 0);
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) {
      out << ',' << format_double(ds.X(static_cast<Eigen::Index>(i), j));
    }
    out << '\n';
  }
}

std::vector<bool> flag_corrupted(const Vector& lambda) {
  std::vector<bool> out(static_cast<std::size_t>(lambda.size()));
  for (Eigen::Index i = 0; i < lambda.size(); ++i) out[static_cast<std::size_t>(i)] = lambda(i) < 0.0;
  return out;
}

double f1_score(const std::vector<bool>& predicted_corrupt, const std::vector<bool>& mask) {
  if (predicted_corrupt.size() != mask.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "f1_score: length mismatch");
  }
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (predicted_corrupt[i] && mask[i]) ++tp;
    else if (predicted_corrupt[i]) ++fp;
    else if (mask[i]) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace bilevel
