#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "fedbargain/data.hpp"
#include "fedbargain/fl.hpp"

using namespace fedbargain;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> header(std::uint32_t magic, std::initializer_list<std::uint32_t> dims) {
  std::vector<std::uint8_t> out;
  auto put = [&](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  };
  put(magic);
  for (auto d : dims) put(d);
  return out;
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fedbargain_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

double label_tv(const Dataset& ds, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<double> pa(static_cast<std::size_t>(ds.num_classes)), pb(pa.size());
  for (auto i : a) pa[static_cast<std::size_t>(ds.labels[i])] += 1.0 / static_cast<double>(a.size());
  for (auto i : b) pb[static_cast<std::size_t>(ds.labels[i])] += 1.0 / static_cast<double>(b.size());
  double tv = 0;
  for (std::size_t c = 0; c < pa.size(); ++c) tv += 0.5 * std::abs(pa[c] - pb[c]);
  return tv;
}

void check_partition(const Dataset& ds, const std::vector<std::vector<std::size_t>>& shards) {
  std::vector<std::size_t> all;
  for (const auto& s : shards) {
    CHECK_FALSE(s.empty());
    all.insert(all.end(), s.begin(), s.end());
  }
  std::sort(all.begin(), all.end());
  REQUIRE(all.size() == ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
}

}  // namespace

TEST_CASE("gen_synthetic shape, balance and determinism") {
  const Dataset a = gen_synthetic(3, 10, 601, 3.0, 7);
  CHECK_NOTHROW(a.validate());
  CHECK(a.size() == 601);
  CHECK(a.dim() == 10);
  CHECK(std::count(a.labels.begin(), a.labels.end(), 0) == 201);
  CHECK(std::count(a.labels.begin(), a.labels.end(), 2) == 200);
  CHECK(a.features.minCoeff() >= 0.0);
  CHECK(a.features.maxCoeff() <= 1.0);

  const Dataset b = gen_synthetic(3, 10, 601, 3.0, 7);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(gen_synthetic(3, 10, 601, 3.0, 8).features != a.features);

  CHECK_THROWS_AS(gen_synthetic(1, 2, 10, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_synthetic(3, 0, 10, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_synthetic(5, 2, 4, 1.0, 0), std::invalid_argument);
}

TEST_CASE("well separated blobs are linearly separable") {
  const Dataset ds = gen_synthetic(2, 1, 100, 100.0, 1);
  SolverConfig cfg;
  cfg.l2_reg = 1e-4;
  const LocalResult fit = local_solve(zero_weights(2, 1), ds, 1e-3, cfg);
  CHECK(accuracy(fit.weights, ds) == 1.0);
}

TEST_CASE("zero separation leaves classes indistinguishable") {
  const Dataset train = gen_synthetic(3, 5, 600, 0.0, 1);
  const Dataset test = gen_synthetic(3, 5, 3000, 0.0, 2);
  SolverConfig cfg;
  cfg.l2_reg = 1e-2;
  const LocalResult fit = local_solve(zero_weights(3, 5), train, 1e-3, cfg);
  CHECK(std::abs(accuracy(fit.weights, test) - 1.0 / 3.0) < 0.05);
}

TEST_CASE("iid partition") {
  const Dataset ds = gen_synthetic(3, 4, 600, 2.0, 1);
  const auto one = partition_indices(ds, {PartitionMode::Iid, 1.0, 1, 3});
  REQUIRE(one.size() == 1);
  check_partition(ds, one);

  const auto five = partition_indices(ds, {PartitionMode::Iid, 1.0, 5, 3});
  for (const auto& s : five) CHECK(s.size() == 120);
  check_partition(ds, five);

  const auto shards = partition(ds, {PartitionMode::Iid, 1.0, 5, 3});
  CHECK(shards[2].features.row(0) == ds.features.row(static_cast<Eigen::Index>(five[2][0])));
  CHECK(partition_indices(ds, {PartitionMode::Iid, 1.0, 5, 3}) == five);
}

TEST_CASE("partition invariants hold on random specs") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 50 + rng() % 400;
    const int k = 2 + static_cast<int>(rng() % 5);
    const Dataset ds = gen_synthetic(k, 3, n, 1.0, rng());
    PartitionSpec spec;
    spec.mode = trial % 2 ? PartitionMode::Dirichlet : PartitionMode::Iid;
    spec.alpha = 0.3 + static_cast<double>(rng() % 100) / 20.0;
    spec.num_clients = 1 + rng() % 8;
    spec.seed = rng();
    check_partition(ds, partition_indices(ds, spec));
  }
}

TEST_CASE("dirichlet partition with small alpha skews labels") {
  const Dataset ds = gen_synthetic(3, 4, 600, 2.0, 1);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto shards = partition_indices(ds, {PartitionMode::Dirichlet, 0.1, 5, seed});
    check_partition(ds, shards);
    double worst = 0;
    for (std::size_t a = 0; a < shards.size(); ++a) {
      for (std::size_t b = a + 1; b < shards.size(); ++b) worst = std::max(worst, label_tv(ds, shards[a], shards[b]));
    }
    CHECK(worst >= 0.3);
  }
}

TEST_CASE("partition errors") {
  const Dataset ds = gen_synthetic(2, 2, 6, 1.0, 1);
  CHECK_THROWS_AS(partition_indices(ds, {PartitionMode::Iid, 1.0, 7, 0}), std::invalid_argument);
  CHECK_THROWS_AS(partition_indices(ds, {PartitionMode::Dirichlet, 0.0, 2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(partition_indices(ds, {PartitionMode::Dirichlet, 1e-3, 6, 0}), std::runtime_error);
}

TEST_CASE("idx hand-built fixture parses exactly") {
  auto images = header(0x00000803, {2, 2, 2});
  images.insert(images.end(), {0, 51, 102, 255, 255, 0, 17, 34});
  auto labels = header(0x00000801, {2});
  labels.insert(labels.end(), {1, 0});

  const Dataset ds = dataset_from_idx(parse_idx_images(images), parse_idx_labels(labels));
  REQUIRE(ds.size() == 2);
  REQUIRE(ds.dim() == 4);
  Eigen::MatrixXd expected(2, 4);
  expected << 0.0, 0.2, 0.4, 1.0, 1.0, 0.0, 17.0 / 255.0, 34.0 / 255.0;
  CHECK(ds.features == expected);
  CHECK(ds.labels == std::vector<int>{1, 0});

  const fs::path dir = temp_dir("fixture");
  write_bytes(dir / "img", images);
  write_bytes(dir / "lbl", labels);
  const Dataset from_disk = load_idx(dir / "img", dir / "lbl");
  CHECK(from_disk.features == expected);
}

TEST_CASE("idx header dimensions") {
  auto images = header(0x00000803, {60000, 28, 28});
  images.resize(images.size() + 60000u * 784u, 0);
  const IdxImages parsed = parse_idx_images(images);
  CHECK(parsed.count == 60000);
  CHECK(parsed.rows * parsed.cols == 784);
  const std::vector<std::uint8_t> labels(60000, 3);
  const Dataset ds = dataset_from_idx(parsed, labels);
  CHECK(ds.size() == 60000);
  CHECK(ds.dim() == 784);
}

TEST_CASE("idx errors") {
  auto bad_magic = header(0x00000802, {1});
  bad_magic.push_back(0);
  try {
    parse_idx_labels(bad_magic);
    FAIL("expected IdxFormatError");
  } catch (const IdxFormatError& e) {
    CHECK(std::string(e.what()).find("0x00000802") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_idx_images(header(0x00000801, {1, 1, 1})), IdxFormatError);

  auto short_images = header(0x00000803, {2, 2, 2});
  short_images.insert(short_images.end(), {1, 2, 3});
  CHECK_THROWS_AS(parse_idx_images(short_images), IdxLengthError);
  CHECK_THROWS_AS(parse_idx_images(header(0x00000803, {2})), IdxLengthError);
  auto short_labels = header(0x00000801, {3});
  short_labels.push_back(0);
  CHECK_THROWS_AS(parse_idx_labels(short_labels), IdxLengthError);

  auto images = header(0x00000803, {2, 1, 1});
  images.insert(images.end(), {0, 1});
  const std::vector<std::uint8_t> three{0, 1, 1};
  CHECK_THROWS_AS(dataset_from_idx(parse_idx_images(images), three), IdxConsistencyError);
}

TEST_CASE("idx encode and reload round trip") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    Dataset ds = gen_synthetic(4, 6, 40, 1.5, rng());
    // Quantize first so the round trip is exact.
    ds.features = (ds.features * 255.0).array().round() / 255.0;
    const auto images = encode_idx_images(ds, 2, 3);
    const auto labels = encode_idx_labels(ds);
    const Dataset back = dataset_from_idx(parse_idx_images(images), parse_idx_labels(labels));
    CHECK(back.features == ds.features);
    CHECK(back.labels == ds.labels);
  }
}

TEST_CASE("relative data paths resolve against config dir, then environment") {
  CHECK(resolve_data_path("/abs/file", "cfg") == fs::path("/abs/file"));
  CHECK(resolve_data_path("file", "cfg") == fs::path("cfg/file"));
  ::setenv(kDataDirEnv, "/env/dir", 1);
  CHECK(resolve_data_path("file", "") == fs::path("/env/dir/file"));
  CHECK(resolve_data_path("file", "cfg") == fs::path("cfg/file"));
  ::unsetenv(kDataDirEnv);
  CHECK(resolve_data_path("file", "") == fs::path("file"));
}
