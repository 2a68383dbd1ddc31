#ifndef CCN_CONFIG_HPP
#define CCN_CONFIG_HPP

#include "ccn/dataset.hpp"
#include "ccn/model.hpp"
#include "ccn/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a CLI run reads from its config file.
///
/// Sections: [graph] [recall] [users] [choice] [dataset] [model] [train]
/// [ablation] [features]. Keys are `name = value`; lists are comma
/// separated; booleans accept true/false/1/0. Unknown sections or keys are
/// rejected. [features] overrides the input widths for configs that are not
/// tied to a dataset (param-count on the paper-scale model).
struct RunConfig {
  DatasetConfig dataset;
  ModelConfig model;  // input widths are overwritten from the dataset layout
  TrainConfig train;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool has_feature_override = false;
  int fields = 5;  // round-robin field count under [features]
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Model config for a dataset layout, keeping the hyper-parameters of `rc`.
ModelConfig model_for_layout(const RunConfig& rc, const FeatureLayout& layout);
/// Model config for [features] widths (round-robin field partition).
ModelConfig model_from_features(const RunConfig& rc);

}  // namespace ccn

#endif  // CCN_CONFIG_HPP
