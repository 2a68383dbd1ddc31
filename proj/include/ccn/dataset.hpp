#ifndef CCN_DATASET_HPP
#define CCN_DATASET_HPP

#include "ccn/features.hpp"
#include "ccn/world.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace ccn {

struct DatasetConfig {
  world::GraphConfig graph;
  world::RecallConfig recall;
  world::UserConfig users;
  world::ChoiceConfig choice;
  int n_samples = 22000;
  int n_routes = 8;
  double test_fraction = 1.0 / 11.0;
  int n_users = 1000;
  int history_len = 4;
  double min_trip_m = 2500.0;
  int max_od_attempts = 200;
};

struct Dataset {
  world::RoadGraph graph;
  FeatureLayout layout;
  std::vector<Sample> samples;
  int discarded = 0;  // o/d draws rejected by recall
};

/// Builds a synthetic navigation log: one graph, a user pool with
/// histories, then one sample per index from an RNG derived from
/// (seed, index). The last `test_fraction` of samples form the test split.
Dataset generate_dataset(const DatasetConfig& cfg, std::uint64_t seed);

struct DatasetStats {
  int samples = 0;
  int train = 0;
  int test = 0;
  int n_routes = 0;
  int discarded = 0;
  double label_entropy = 0.0;  // nats, over the label position l
  double mean_cr_recall_best = 0.0;
  double mean_cr_best = 0.0;
  double mean_cr_random = 0.0;
  double mean_detour_ratio = 0.0;

  std::string to_text() const;
};

DatasetStats dataset_stats(const std::vector<Sample>& samples, int discarded = 0);

nlohmann::json sample_to_json(const Sample& s);
/// Throws DataError on malformed input.
Sample sample_from_json(const nlohmann::json& j);
nlohmann::json layout_to_json(const FeatureLayout& l);
FeatureLayout layout_from_json(const nlohmann::json& j);

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON Lines, one sample per line.
void write_samples(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::vector<Sample> read_samples(const std::filesystem::path& path);

/// "<dataset>.layout.json" and "<dataset>.stats.txt" next to the dataset.
std::filesystem::path layout_path(const std::filesystem::path& dataset);
std::filesystem::path stats_path(const std::filesystem::path& dataset);

/// Writes the dataset, its layout manifest and its stats report.
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
FeatureLayout read_layout(const std::filesystem::path& dataset);

/// Samples of one split ("train", "test" or "all").
std::vector<Sample> select_split(const std::vector<Sample>& samples, const std::string& split);

}  // namespace ccn

#endif  // CCN_DATASET_HPP
