#ifndef CCN_EVAL_HPP
#define CCN_EVAL_HPP

#include "ccn/features.hpp"
#include "ccn/model.hpp"
#include "ccn/training.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ccn {

// ---------------------------------------------------------------------------
// Metrics

/// Rank-statistic AUC; tied scores count one half. NaN when a class is empty.
double auc(std::span<const double> scores, std::span<const int> labels);

struct EvalReport {
  std::string model;
  double cr_off = 0.0;
  double top1_acc = 0.0;
  double pair_auc = 0.0;        // pooled over every masked pair
  double pair_auc_macro = 0.0;  // mean of per-sample AUCs where defined
  int samples = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

std::string report_header();
std::string report_row(const EvalReport& r);

/// Index of the largest score, ties to the smallest index.
int argmax_first(std::span<const double> v);

/// Per-sample model outputs in the sample's original candidate order.
struct Prediction {
  std::vector<double> p_r;
  FeatureMatrix p_e;  // pair probabilities (from P^R when the model has no PS)
};

std::vector<Prediction> predict(CcnModel<float>& model, const std::vector<Sample>& samples, int batch_size = 256);

/// Scores recommended routes and masked pair probabilities.
EvalReport score_predictions(const std::vector<Sample>& samples, const std::vector<Prediction>& preds);

/// Eval-mode forward over `samples` (normalized). Throws on an empty set.
EvalReport evaluate(CcnModel<float>& model, const std::vector<Sample>& samples, int batch_size = 256);

// ---------------------------------------------------------------------------
// Baselines

enum class Baseline { ShortestDistance, ShortestTime, Recall };

std::string baseline_name(Baseline b);
/// argmin length / argmin ETA / argmax recall score, ties to the smallest index.
int baseline_pick(const Sample& s, Baseline b);
EvalReport run_baseline(const std::vector<Sample>& samples, Baseline b);
/// Best achievable cr_off (always picking the label route).
double oracle_cr(const std::vector<Sample>& samples);

// ---------------------------------------------------------------------------
// Explanations

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Explanation {
  int i = 0;
  int j = 0;
  std::vector<std::string> fields;
  std::vector<float> scores;  // S^E_{ij m}
  float sum = 0.0f;           // pooled pre-sigmoid score
  float p_e = 0.5f;
  std::vector<int> ranked;    // field indices by descending |score|

  std::string render(const std::vector<std::string>& route_names = {}) const;
};

/// Field decomposition for pair (i, j) in the sample's original order.
/// Throws UnsupportedOperation for models without PS.
Explanation explain(CcnModel<float>& model, const Sample& normalized, int i, int j);

/// Explanations of the recommended route against every other candidate.
std::vector<Explanation> explain_recommendation(CcnModel<float>& model, const Sample& normalized, int* recommended);

// ---------------------------------------------------------------------------
// Ablation

struct AblationVariant {
  std::string name;
  bool use_xc = true;
  bool use_cco = true;
  bool use_ps = true;
  bool distill = true;
};

/// Table-1 rows followed by the Table-2 PS rows.
std::vector<AblationVariant> default_ablation_grid();

struct AblationRow {
  AblationVariant variant;
  std::vector<std::uint64_t> seeds;
  std::vector<EvalReport> runs;
  double cr_mean = 0.0, cr_std = 0.0;
  double top1_mean = 0.0, top1_std = 0.0;
  double auc_mean = 0.0, auc_std = 0.0;
  double seconds = 0.0;
};

struct AblationSetup {
  ModelConfig base;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

/// Trains every variant on every seed. `progress` receives one line per run.
std::vector<AblationRow> run_ablation(const std::vector<Sample>& train_set, const std::vector<Sample>& test_set,
                                      const std::vector<AblationVariant>& grid, const AblationSetup& setup,
                                      const std::function<void(const std::string&)>& progress = {});

std::string ablation_csv(const std::vector<AblationRow>& rows);

/// Sample mean and (n-1) standard deviation.
std::pair<double, double> mean_std(std::span<const double> v);

}  // namespace ccn

#endif  // CCN_EVAL_HPP
