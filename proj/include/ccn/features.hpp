#ifndef CCN_FEATURES_HPP
#define CCN_FEATURES_HPP

#include "ccn/ops.hpp"
#include "ccn/tensor.hpp"
#include "ccn/world.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ccn {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FeatureRow = Eigen::RowVectorXd;

/// N x N x F block of pair features, row-major.
struct PairFeatures {
  Index n = 0;
  Index width = 0;
  std::vector<double> values;

  PairFeatures() = default;
  PairFeatures(Index n_, Index width_)
      : n(n_), width(width_), values(static_cast<std::size_t>(n_ * n_ * width_), 0.0) {}

  double& operator()(Index i, Index j, Index k) { return values[static_cast<std::size_t>((i * n + j) * width + k)]; }
  double operator()(Index i, Index j, Index k) const {
    return values[static_cast<std::size_t>((i * n + j) * width + k)];
  }
  std::span<const double> cell(Index i, Index j) const {
    return {values.data() + (i * n + j) * width, static_cast<std::size_t>(width)};
  }
};

// ---------------------------------------------------------------------------
// Layout and fields

struct ColumnInfo {
  std::string name;
  std::string field;  // semantic field, or "user" / "scenario"

  bool operator==(const ColumnInfo&) const = default;
};

/// Column manifest of every feature block. Serialized next to datasets.
struct FeatureLayout {
  std::vector<ColumnInfo> route;
  std::vector<ColumnInfo> pair;
  std::vector<ColumnInfo> user;
  std::vector<ColumnInfo> scenario;

  static FeatureLayout standard();
  bool operator==(const FeatureLayout&) const = default;
};

/// Column groups of the route and pair blocks, one group per semantic field.
struct FieldPartition {
  std::vector<std::string> names;
  std::vector<std::vector<Index>> route_cols;
  std::vector<std::vector<Index>> pair_cols;

  int size() const { return static_cast<int>(names.size()); }

  /// Groups columns by their `field` tag in first-seen order. Requires M >= 2.
  static FieldPartition from_layout(const FeatureLayout& layout);
  /// Every comparison column in one field.
  static FieldPartition single(Index route_width, Index pair_width);
  /// Round-robin assignment of columns to `m` fields (for synthetic configs).
  static FieldPartition round_robin(Index route_width, Index pair_width, int m);

  /// Throws unless fields are disjoint and cover every column.
  void validate(Index route_width, Index pair_width) const;
  bool operator==(const FieldPartition&) const = default;
};

/// Column map of the comprehensive comparison input
///   C^E[i][j] = [x_r[i], x_h[i], x_r[j], x_h[j], x_c[i][j], x_c[j][i], x_u].
struct ComparisonLayout {
  Index route_width = 0;    // F_r
  Index history_width = 0;  // F_h
  Index pair_width = 0;     // F_c
  Index user_width = 0;     // F_u

  Index width() const { return 2 * (route_width + history_width) + 2 * pair_width + user_width; }
  Index own_route() const { return 0; }
  Index own_history() const { return route_width; }
  Index other_route() const { return route_width + history_width; }
  Index other_history() const { return 2 * route_width + history_width; }
  Index pair_forward() const { return 2 * (route_width + history_width); }
  Index pair_backward() const { return pair_forward() + pair_width; }
  Index user() const { return pair_backward() + pair_width; }

  /// History and user columns; shared by every field.
  std::vector<Index> user_columns() const;
  /// Comparison columns of field m (both routes, both pair directions).
  std::vector<Index> comparison_columns(const FieldPartition& p, int m) const;
  /// comparison_columns(m) followed by user_columns().
  std::vector<std::vector<Index>> field_columns(const FieldPartition& p) const;
};

/// Splits C^E into one tensor per field along the last axis.
template <typename Scalar>
std::vector<Tensor<Scalar>> gather_fields(const Tensor<Scalar>& c_e,
                                          const std::vector<std::vector<Index>>& field_columns) {
  std::vector<Tensor<Scalar>> out;
  out.reserve(field_columns.size());
  for (const auto& cols : field_columns) out.push_back(gather_axis(c_e, -1, std::span<const Index>(cols)));
  return out;
}

// ---------------------------------------------------------------------------
// Samples

struct HistoryRecord {
  std::vector<double> scenario;  // Scenario::one_hot layout
  FeatureRow route;              // one x_r row
};

struct Sample {
  std::string sample_id;
  std::string split;  // "train" or "test"
  std::vector<world::Route> routes;
  FeatureMatrix x_r;  // N x F_r
  FeatureRow x_u;     // F_u
  FeatureRow x_s;     // F_s
  PairFeatures x_c;   // N x N x F_c
  std::vector<HistoryRecord> history;
  std::vector<double> y_r;  // N
  FeatureMatrix y_e;        // N x N
  int l = 0;
  std::vector<double> crs;  // coverage rate of each candidate

  Index n_routes() const { return x_r.rows(); }
};

/// Throws std::invalid_argument naming the first violated sample invariant.
void validate_sample(const Sample& s);

// ---------------------------------------------------------------------------
// Feature construction

/// Edges of r_i not in r_j, and of r_j not in r_i, each in route order.
std::pair<std::vector<int>, std::vector<int>> non_overlap_segments(const world::Route& r_i,
                                                                   const world::Route& r_j);

/// Features of the non-overlapping segment of every ordered route pair.
PairFeatures comparison_features(std::span<const world::Route> routes, const world::RoadGraph& g,
                                 const world::Scenario& sc);

/// Per-route item features. Rank 0 is the highest recall score.
FeatureMatrix route_features(std::span<const world::Route> routes, const world::RoadGraph& g,
                             const world::Scenario& sc, std::span<const double> recall_scores);

/// Attention pooling of history route vectors: row i is the
/// softmax(x_r[i] . h_t)-weighted mean of the history rows.
FeatureMatrix history_representation(const FeatureMatrix& history_routes, const FeatureMatrix& x_r);
FeatureMatrix history_matrix(const Sample& s);

/// Index of the detour-ratio column in the pair block.
inline constexpr Index kDetourRatioColumn = 9;
/// Index of the recall-score column in the route block.
inline constexpr Index kRecallScoreColumn = 10;
inline constexpr Index kRecallRankColumn = 11;
inline constexpr Index kEtaColumn = 0;
inline constexpr Index kLengthColumn = 2;

// ---------------------------------------------------------------------------
// Normalization

inline constexpr double kStdFloor = 1e-6;

struct NormStats {
  FeatureRow route_mean, route_std;
  FeatureRow pair_mean, pair_std;  // over off-diagonal cells
  FeatureRow user_mean, user_std;
  bool fitted = false;
};

NormStats fit_normalize(std::span<const Sample> train);
/// Z-scores every block with frozen stats; the x_c diagonal stays zero.
Sample apply_normalize(const Sample& s, const NormStats& stats);

}  // namespace ccn

#endif  // CCN_FEATURES_HPP
