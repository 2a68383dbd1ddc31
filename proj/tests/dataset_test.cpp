#include "ccn/dataset.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace ccn;
namespace fs = std::filesystem;

namespace {

DatasetConfig small_config() {
  DatasetConfig cfg;
  cfg.n_samples = 33;
  cfg.n_users = 10;
  return cfg;
}

fs::path temp_dir() {
  const auto dir = fs::temp_directory_path() / "ccn_dataset_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("synth-world") {

TEST_CASE("dataset generation is seed deterministic and valid") {
  const auto a = generate_dataset(small_config(), 4);
  const auto b = generate_dataset(small_config(), 4);
  const auto c = generate_dataset(small_config(), 5);
  REQUIRE(a.samples.size() == 33);
  bool differs = false;
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    CHECK(sample_to_json(a.samples[k]) == sample_to_json(b.samples[k]));
    differs = differs || sample_to_json(a.samples[k]) != sample_to_json(c.samples[k]);
    validate_sample(a.samples[k]);
    CHECK(a.samples[k].n_routes() == 8);
  }
  CHECK(differs);
  CHECK(a.layout == FeatureLayout::standard());
  CHECK(select_split(a.samples, "test").size() == 3);
  CHECK(select_split(a.samples, "train").size() == 30);
  CHECK(select_split(a.samples, "all").size() == 33);
  CHECK_THROWS(select_split(a.samples, "validation"));
}

TEST_CASE("labels follow the coverage rates") {
  for (const auto& s : generate_dataset(small_config(), 8).samples) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(s.crs.size()); ++i)
      if (s.crs[static_cast<std::size_t>(i)] > s.crs[static_cast<std::size_t>(best)]) best = i;
    CHECK(s.l == best);
    CHECK(s.y_r[static_cast<std::size_t>(best)] == 1.0);
    for (double cr : s.crs) CHECK((cr >= 0.0 && cr <= 1.0));
  }
}

TEST_CASE("samples survive a JSON Lines round trip") {
  const auto ds = generate_dataset(small_config(), 6);
  const auto path = temp_dir() / "ds.jsonl";
  write_dataset(path, ds);
  CHECK(fs::exists(layout_path(path)));
  CHECK(fs::exists(stats_path(path)));
  const auto back = read_samples(path);
  REQUIRE(back.size() == ds.samples.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    CHECK(sample_to_json(back[k]) == sample_to_json(ds.samples[k]));
    CHECK(back[k].x_r == ds.samples[k].x_r);
    CHECK(back[k].x_c.values == ds.samples[k].x_c.values);
  }
  CHECK(read_layout(path) == ds.layout);

  const auto st = dataset_stats(ds.samples, ds.discarded);
  CHECK(st.samples == 33);
  CHECK(st.train + st.test == 33);
  CHECK(st.mean_cr_best >= st.mean_cr_recall_best);
  CHECK(st.mean_cr_best >= st.mean_cr_random);
  CHECK_FALSE(st.to_text().empty());
}

TEST_CASE("malformed data files raise DataError") {
  const auto dir = temp_dir();
  CHECK_THROWS_AS(read_samples(dir / "absent.jsonl"), DataError);
  const auto bad = dir / "bad.jsonl";
  {
    std::ofstream(bad) << "{not json}\n";
  }
  CHECK_THROWS_AS(read_samples(bad), DataError);

  const auto ds = generate_dataset(small_config(), 6);
  auto j = sample_to_json(ds.samples[0]);
  j.erase("x_r");
  CHECK_THROWS_AS(sample_from_json(j), DataError);

  j = sample_to_json(ds.samples[0]);
  j["l"] = 42;
  CHECK_THROWS_AS(sample_from_json(j), DataError);

  j = sample_to_json(ds.samples[0]);
  j["x_c"][0].erase(0);
  CHECK_THROWS_AS(sample_from_json(j), DataError);
}

}  // TEST_SUITE
