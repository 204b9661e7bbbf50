#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>

#include "graspinfer/errors.hpp"
#include "graspinfer/graspsim.hpp"
#include "graspinfer/io.hpp"
#include "test_util.hpp"

using namespace graspinfer;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("format_double is shortest round-trip") {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double x = std::exp(rng.uniform(-30, 30)) * (rng.uniform() < 0.5 ? -1 : 1);
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.0) == "0");
}

TEST_CASE("csv round trip preserves every value") {
  Rng rng(2);
  Eigen::MatrixXd rows(37, 4);
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows(i / 4, i % 4) = rng.normal() * 1e3;
  const std::string path = temp_path("graspinfer_io_test.csv");
  write_csv(path, {"a", "b", "c", "d"}, rows);
  const CsvTable table = read_csv(path);
  CHECK(table.header == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(table.rows == rows);  // bitwise via shortest round-trip formatting
}

TEST_CASE("sample batch csv uses chain-major layout") {
  SampleBatch batch;
  batch.spec = ManifoldSpec::euclidean(2);
  batch.config.chains = 3;
  batch.config.transitions = 4;
  batch.config.burn_in = 2;
  batch.draws.resize(6, 2);
  for (Eigen::Index r = 0; r < 6; ++r) batch.draws.row(r) << r * 1.5, -double(r);
  batch.accepted = {1, 2, 2};
  batch.proposed = {4, 4, 4};
  batch.nan_rejects = {0, 0, 0};

  const std::string path = temp_path("graspinfer_batch_test.csv");
  write_sample_batch_csv(path, batch);
  const LoadedDraws loaded = read_sample_batch_csv(path);
  CHECK(loaded.chains == 3);
  CHECK(loaded.retained == 2);
  CHECK(loaded.coords == batch.draws);
}

TEST_CASE("key-value documents round trip exactly") {
  KeyValueDoc doc;
  doc.set("command", std::string("toy-vmf"));
  doc.set("train.lr", 1e-3);
  doc.set("sampler.chains", 100);
  doc.set("seed", std::uint64_t{12345});
  doc.set("nested.key.with.dots", std::string("value with spaces"));

  const KeyValueDoc parsed = KeyValueDoc::parse(doc.to_string());
  CHECK(parsed == doc);

  const std::string path = temp_path("graspinfer_config_test.txt");
  doc.save(path);
  CHECK(KeyValueDoc::load(path) == doc);

  CHECK_THROWS_AS(KeyValueDoc::parse("not a key value line"), ParseError);
  CHECK(KeyValueDoc::parse("# comment only\n\n").entries().empty());
  CHECK_THROWS_AS(doc.get("missing"), ConfigError);
}

TEST_CASE("grasp dataset csv round trips bit-exactly") {
  Rng rng(3);
  GraspDataset data;
  data.scene_id = "fixture";
  data.h.resize(50, 4);
  data.label.resize(50);
  for (Eigen::Index r = 0; r < 50; ++r) {
    for (int j = 0; j < 4; ++j) data.h(r, j) = rng.normal();
    data.label[r] = rng.uniform() < 0.3 ? 1.0 : 0.0;
  }
  const std::string path = temp_path("graspinfer_dataset_test.csv");
  save_grasp_dataset(path, data);
  const GraspDataset loaded = load_grasp_dataset(path);
  CHECK(loaded.scene_id == data.scene_id);
  CHECK(loaded.h == data.h);
  CHECK(loaded.label == data.label);
}
