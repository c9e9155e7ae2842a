#include "fedbargain/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace fedbargain {

void Dataset::validate() const {
  const auto n = size();
  if (static_cast<std::size_t>(features.rows()) != n) {
    throw std::invalid_argument("dataset: feature rows and label count differ");
  }
  if (num_classes < 2) throw std::invalid_argument("dataset: need at least 2 classes");
  if (n < static_cast<std::size_t>(num_classes)) {
    throw std::invalid_argument("dataset: fewer samples than classes");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw std::invalid_argument("dataset: label out of range");
  }
  if (!features.allFinite()) throw std::invalid_argument("dataset: non-finite feature");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

namespace {

Eigen::MatrixXd draw_means(std::mt19937_64& rng, int k, std::size_t d, double radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd means(k, static_cast<Eigen::Index>(d));
  for (int c = 0; c < k; ++c) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(d));
    do {
      for (auto& x : v) x = normal(rng);
    } while (v.norm() == 0.0);
    means.row(c) = radius * v.normalized().transpose();
  }
  return means;
}

double min_pairwise_distance(const Eigen::MatrixXd& means) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < means.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < means.rows(); ++j) {
      best = std::min(best, (means.row(i) - means.row(j)).norm());
    }
  }
  return best;
}

void minmax_scale(Eigen::MatrixXd& x) {
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double lo = x.col(j).minCoeff();
    const double span = x.col(j).maxCoeff() - lo;
    if (span > 0.0) {
      x.col(j) = (x.col(j).array() - lo) / span;
    } else {
      x.col(j).setZero();
    }
  }
}

}  // namespace

Dataset gen_synthetic(int num_classes, std::size_t dim, std::size_t num_samples, double separation,
                      std::uint64_t seed) {
  if (num_classes < 2 || dim < 1) throw std::invalid_argument("gen_synthetic: need K >= 2 and d >= 1");
  if (num_samples < static_cast<std::size_t>(num_classes)) {
    throw std::invalid_argument("gen_synthetic: need N >= K");
  }
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw std::invalid_argument("gen_synthetic: separation must be finite and >= 0");
  }

  std::mt19937_64 rng(seed);
  // Best-spread of a few candidate mean sets; random directions can collide
  // in low dimension (d = 1 has only two).
  constexpr int kMeanCandidates = 64;
  Eigen::MatrixXd means = draw_means(rng, num_classes, dim, separation);
  double spread = min_pairwise_distance(means);
  for (int t = 1; t < kMeanCandidates; ++t) {
    Eigen::MatrixXd cand = draw_means(rng, num_classes, dim, separation);
    const double s = min_pairwise_distance(cand);
    if (s > spread) {
      means = std::move(cand);
      spread = s;
    }
  }

  Dataset ds;
  ds.num_classes = num_classes;
  ds.features.resize(static_cast<Eigen::Index>(num_samples), static_cast<Eigen::Index>(dim));
  ds.labels.reserve(num_samples);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t base = num_samples / static_cast<std::size_t>(num_classes);
  const std::size_t extra = num_samples % static_cast<std::size_t>(num_classes);
  Eigen::Index row = 0;
  for (int c = 0; c < num_classes; ++c) {
    const std::size_t count = base + (static_cast<std::size_t>(c) < extra ? 1 : 0);
    for (std::size_t s = 0; s < count; ++s, ++row) {
      for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
        ds.features(row, j) = means(c, j) + normal(rng);
      }
      ds.labels.push_back(c);
    }
  }
  minmax_scale(ds.features);
  return ds;
}

void PartitionSpec::validate() const {
  if (num_clients < 1) throw std::invalid_argument("partition: num_clients must be >= 1");
  if (mode == PartitionMode::Dirichlet && !(alpha > 0.0 && std::isfinite(alpha))) {
    throw std::invalid_argument("partition: alpha must be finite and > 0");
  }
}

namespace {

std::vector<std::vector<std::size_t>> split_iid(std::size_t n, std::size_t m, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> shards(m);
  const std::size_t base = n / m;
  const std::size_t extra = n % m;
  auto it = order.begin();
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t count = base + (k < extra ? 1 : 0);
    shards[k].assign(it, it + static_cast<std::ptrdiff_t>(count));
    it += static_cast<std::ptrdiff_t>(count);
  }
  return shards;
}

std::vector<std::vector<std::size_t>> split_dirichlet(const Dataset& ds, std::size_t m, double alpha,
                                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<std::vector<std::size_t>> shards(m);
  std::vector<double> share(m);

  for (int c = 0; c < ds.num_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] == c) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);

    double total = 0.0;
    for (auto& s : share) total += (s = gamma(rng));
    if (!(total > 0.0)) {
      // Every gamma draw underflowed; hand the class to one client.
      std::fill(share.begin(), share.end(), 0.0);
      share[std::uniform_int_distribution<std::size_t>(0, m - 1)(rng)] = total = 1.0;
    }

    // Cumulative proportions -> split points.
    double cumulative = 0.0;
    std::size_t begin = 0;
    for (std::size_t k = 0; k < m; ++k) {
      cumulative += share[k] / total;
      std::size_t end = k + 1 == m ? members.size()
                                   : static_cast<std::size_t>(std::llround(
                                         cumulative * static_cast<double>(members.size())));
      end = std::clamp(end, begin, members.size());
      shards[k].insert(shards[k].end(), members.begin() + static_cast<std::ptrdiff_t>(begin),
                       members.begin() + static_cast<std::ptrdiff_t>(end));
      begin = end;
    }
  }
  for (auto& s : shards) std::sort(s.begin(), s.end());
  return shards;
}

}  // namespace

std::vector<std::vector<std::size_t>> partition_indices(const Dataset& ds, const PartitionSpec& spec) {
  spec.validate();
  if (spec.num_clients > ds.size()) {
    throw std::invalid_argument("partition: more clients than samples");
  }
  if (spec.mode == PartitionMode::Iid) return split_iid(ds.size(), spec.num_clients, spec.seed);

  for (int attempt = 0; attempt < kMaxPartitionAttempts; ++attempt) {
    auto shards = split_dirichlet(ds, spec.num_clients, spec.alpha,
                                  spec.seed + static_cast<std::uint64_t>(attempt));
    if (std::none_of(shards.begin(), shards.end(), [](const auto& s) { return s.empty(); })) {
      return shards;
    }
  }
  throw std::runtime_error("partition: could not draw non-empty Dirichlet shards after " +
                           std::to_string(kMaxPartitionAttempts) +
                           " attempts; increase the sample count or alpha");
}

std::vector<Dataset> partition(const Dataset& ds, const PartitionSpec& spec) {
  std::vector<Dataset> shards;
  for (const auto& rows : partition_indices(ds, spec)) shards.push_back(ds.subset(rows));
  return shards;
}

// IDX ------------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
  return os.str();
}

void check_magic(std::span<const std::uint8_t> bytes, std::uint32_t expected, const char* what) {
  if (bytes.size() < 4) {
    throw IdxLengthError(std::string(what) + ": file shorter than the 4-byte magic");
  }
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != expected) {
    throw IdxFormatError(std::string(what) + ": bad magic " + hex32(magic) + ", expected " +
                         hex32(expected));
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, kIdxImagesMagic, "idx images");
  if (bytes.size() < 16) throw IdxLengthError("idx images: truncated header");
  IdxImages img;
  img.count = read_be32(bytes, 4);
  img.rows = read_be32(bytes, 8);
  img.cols = read_be32(bytes, 12);
  const std::size_t payload = img.count * img.rows * img.cols;
  if (bytes.size() - 16 < payload) {
    throw IdxLengthError("idx images: expected " + std::to_string(payload) + " payload bytes, found " +
                         std::to_string(bytes.size() - 16));
  }
  img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
  return img;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, kIdxLabelsMagic, "idx labels");
  if (bytes.size() < 8) throw IdxLengthError("idx labels: truncated header");
  const std::size_t count = read_be32(bytes, 4);
  if (bytes.size() - 8 < count) {
    throw IdxLengthError("idx labels: expected " + std::to_string(count) + " payload bytes, found " +
                         std::to_string(bytes.size() - 8));
  }
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

Dataset dataset_from_idx(const IdxImages& images, std::span<const std::uint8_t> labels) {
  if (images.count != labels.size()) {
    throw IdxConsistencyError("idx: " + std::to_string(images.count) + " images but " +
                              std::to_string(labels.size()) + " labels");
  }
  const std::size_t d = images.rows * images.cols;
  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(images.count), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < images.count; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(images.pixels[i * d + j]) / 255.0;
    }
  }
  ds.labels.assign(labels.begin(), labels.end());
  const int max_label = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  ds.num_classes = std::max(2, max_label + 1);
  return ds;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto image_bytes = read_file(images);
  const auto label_bytes = read_file(labels);
  return dataset_from_idx(parse_idx_images(image_bytes), parse_idx_labels(label_bytes));
}

std::vector<std::uint8_t> encode_idx_images(const Dataset& ds, std::size_t rows, std::size_t cols) {
  if (rows * cols != ds.dim()) throw std::invalid_argument("encode_idx_images: rows*cols != d");
  std::vector<std::uint8_t> out;
  out.reserve(16 + ds.size() * ds.dim());
  write_be32(out, kIdxImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(ds.size()));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      const double v = std::clamp(ds.features(i, j), 0.0, 1.0);
      out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const Dataset& ds) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + ds.size());
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(ds.size()));
  for (int y : ds.labels) {
    if (y < 0 || y > 255) throw std::invalid_argument("encode_idx_labels: label does not fit a byte");
    out.push_back(static_cast<std::uint8_t>(y));
  }
  return out;
}

std::filesystem::path resolve_data_path(const std::filesystem::path& path,
                                        const std::string& config_dir) {
  if (path.is_absolute()) return path;
  if (!config_dir.empty()) return std::filesystem::path(config_dir) / path;
  if (const char* env = std::getenv(kDataDirEnv); env != nullptr && *env != '\0') {
    return std::filesystem::path(env) / path;
  }
  return path;
}

}  // namespace fedbargain
