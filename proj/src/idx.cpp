#include "bilevel/data.hpp"

#include "bilevel/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

namespace bilevel {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw Error(ErrorCode::kIo, "truncated IDX header in " + path.string());
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

std::vector<unsigned char> read_bytes(std::istream& in, std::size_t count,
                                      const std::filesystem::path& path) {
  std::vector<unsigned char> buf(count);
  if (count > 0 && !in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count))) {
    throw Error(ErrorCode::kIo, "truncated IDX payload in " + path.string());
  }
  return buf;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  std::ifstream img = open_in(images);
  const std::uint32_t img_magic = read_be32(img, images);
  if (img_magic != kImageMagic) {
    throw Error(ErrorCode::kIdxBadMagic, images.string() + ": expected image magic 0x00000803");
  }
  const std::uint32_t n = read_be32(img, images);
  const std::uint32_t rows = read_be32(img, images);
  const std::uint32_t cols = read_be32(img, images);

  std::ifstream lab = open_in(labels);
  const std::uint32_t lab_magic = read_be32(lab, labels);
  if (lab_magic != kLabelMagic) {
    throw Error(ErrorCode::kIdxBadMagic, labels.string() + ": expected label magic 0x00000801");
  }
  const std::uint32_t n_labels = read_be32(lab, labels);
  if (n_labels != n) {
    throw Error(ErrorCode::kIdxCountMismatch, std::to_string(n) + " images vs " +
                                                  std::to_string(n_labels) + " labels");
  }

  const std::size_t d = std::size_t{rows} * cols;
  const auto pixels = read_bytes(img, std::size_t{n} * d, images);
  const auto label_bytes = read_bytes(lab, n, labels);

  Dataset ds;
  ds.X.resize(n, static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(pixels[i * d + j]) / 255.0;
    }
  }
  ds.y.assign(label_bytes.begin(), label_bytes.end());
  ds.mask.assign(n, false);
  ds.num_classes = ds.y.empty() ? 0 : *std::max_element(ds.y.begin(), ds.y.end()) + 1;
  return ds;
}

void write_idx(const Dataset& ds, std::size_t rows, std::size_t cols,
               const std::filesystem::path& images, const std::filesystem::path& labels) {
  if (static_cast<std::size_t>(ds.X.cols()) != rows * cols) {
    throw Error(ErrorCode::kDimensionMismatch, "rows * cols must equal the feature dimension");
  }
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw Error(ErrorCode::kIo, "cannot open IDX output files");

  const auto n = static_cast<std::uint32_t>(ds.size());
  write_be32(img, kImageMagic);
  write_be32(img, n);
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) {
      const double scaled = std::clamp(std::round(ds.X(i, j) * 255.0), 0.0, 255.0);
      img.put(static_cast<char>(static_cast<unsigned char>(scaled)));
    }
  }
  write_be32(lab, kLabelMagic);
  write_be32(lab, n);
  for (int label : ds.y) lab.put(static_cast<char>(static_cast<unsigned char>(label)));
  if (!img || !lab) throw Error(ErrorCode::kIo, "failed writing IDX files");
}

}  // namespace bilevel
