#pragma once

#include "bilevel/problems.hpp"
#include "bilevel/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

namespace bilevel {

struct Dataset {
  Matrix X;                   // N × d
  std::vector<int> y;         // labels in [0, C)
  std::vector<bool> mask;     // true where the label was corrupted
  int num_classes = 0;

  std::size_t size() const { return y.size(); }
  LabeledSet labeled() const { return {X, y}; }
  // Rows at the given indices, in order.
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

struct EpisodeSet {
  std::vector<Episode> tasks;
  std::size_t way = 0;
  std::size_t shot = 0;
  std::size_t val_per_class = 0;
};

/// Gaussian blobs: C centers on a scaled simplex with pairwise distance
/// `margin` (center c = margin/√2 · e_c when C ≤ d; otherwise random
/// directions of the same norm), unit-variance features around them.
Dataset gen_synthetic(std::uint64_t seed, std::size_t n, std::size_t d, int num_classes,
                      double margin);

/// Replaces exactly ⌊ρ·N⌋ labels, chosen without replacement, by a uniformly
/// drawn different label. The input is not modified.
Dataset corrupt_labels(const Dataset& ds, double rho, std::uint64_t seed);

std::pair<Dataset, Dataset> split(const Dataset& ds, std::size_t n_tr, std::size_t n_val,
                                  std::uint64_t seed);

EpisodeSet make_episodes(const Dataset& ds, std::size_t way, std::size_t shot,
                         std::size_t val_per_class, std::size_t n_tasks, std::uint64_t seed);

// IDX (MNIST) files: images magic 0x00000803, labels magic 0x00000801.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
// Writes features as bytes round(255·x) clamped to [0, 255]; rows·cols must equal d.
void write_idx(const Dataset& ds, std::size_t rows, std::size_t cols,
               const std::filesystem::path& images, const std::filesystem::path& labels);

// Header: index,label,corrupted,feat_0..feat_{d-1}
void write_csv(const Dataset& ds, std::ostream& out);

// A sample is flagged corrupted when its un-normalized weight is negative.
std::vector<bool> flag_corrupted(const Vector& lambda);

// F1 of corruption detection; 0 when there are no true positives.
double f1_score(const std::vector<bool>& predicted_corrupt, const std::vector<bool>& mask);

}  // namespace bilevel
