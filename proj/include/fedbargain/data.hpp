#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedbargain {

/// Row-major sample matrix with integer class labels.
struct Dataset {
  Eigen::MatrixXd features;  // N x d
  std::vector<int> labels;   // N entries in [0, num_classes)
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }

  /// Throws std::invalid_argument on shape, label or finiteness violations.
  void validate() const;
  /// Rows selected by `rows`, in that order.
  Dataset subset(std::span<const std::size_t> rows) const;
};

/// K Gaussian blobs with unit variance around means on a sphere of radius
/// `separation`; features min-max scaled to [0, 1] per column.
Dataset gen_synthetic(int num_classes, std::size_t dim, std::size_t num_samples, double separation,
                      std::uint64_t seed);

enum class PartitionMode { Iid, Dirichlet };

struct PartitionSpec {
  PartitionMode mode = PartitionMode::Iid;
  double alpha = 1.0;  // Dirichlet concentration
  std::size_t num_clients = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Maximum Dirichlet redraws before giving up on non-empty shards.
inline constexpr int kMaxPartitionAttempts = 100;

/// Row indices owned by each client. Disjoint, non-empty, covering [0, N).
std::vector<std::vector<std::size_t>> partition_indices(const Dataset& ds, const PartitionSpec& spec);

/// Materialized shards in client order.
std::vector<Dataset> partition(const Dataset& ds, const PartitionSpec& spec);

// IDX ingestion. Errors derive from IdxError so callers can catch the family.
struct IdxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IdxFormatError : IdxError {
  using IdxError::IdxError;
};
struct IdxLengthError : IdxError {
  using IdxError::IdxError;
};
struct IdxConsistencyError : IdxError {
  using IdxError::IdxError;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols
};

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

/// Pixels scaled by 1/255; label count must match image count.
Dataset dataset_from_idx(const IdxImages& images, std::span<const std::uint8_t> labels);

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Encodes features as rows x cols images (values rounded from [0,1] to bytes).
std::vector<std::uint8_t> encode_idx_images(const Dataset& ds, std::size_t rows, std::size_t cols);
std::vector<std::uint8_t> encode_idx_labels(const Dataset& ds);

/// Name of the environment variable consulted for relative IDX paths.
inline constexpr const char* kDataDirEnv = "FEDBARGAIN_DATA_DIR";

/// Resolves a relative dataset path against `config_dir` when non-empty,
/// otherwise against $FEDBARGAIN_DATA_DIR, otherwise leaves it unchanged.
std::filesystem::path resolve_data_path(const std::filesystem::path& path,
                                        const std::string& config_dir);

}  // namespace fedbargain
