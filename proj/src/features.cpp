#include "ccn/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace ccn {

// ---------------------------------------------------------------------------
// Layout

FeatureLayout FeatureLayout::standard() {
  FeatureLayout l;
  l.route = {{"eta_min", "time"},          {"freeflow_eta_min", "time"}, {"length_km", "distance"},
             {"toll_count", "toll"},       {"light_count", "comfort"},   {"turn_count", "comfort"},
             {"mean_heat", "familiarity"}, {"share_arterial", "comfort"}, {"share_main", "comfort"},
             {"share_local", "comfort"},   {"recall_score", "familiarity"}, {"recall_rank", "familiarity"}};
  l.pair = {{"seg_length_km", "distance"},   {"seg_eta_min", "time"},
            {"seg_toll_count", "toll"},      {"seg_light_count", "comfort"},
            {"seg_turn_count", "comfort"},   {"seg_mean_heat", "familiarity"},
            {"seg_share_arterial", "comfort"}, {"seg_share_main", "comfort"},
            {"seg_share_local", "comfort"},  {"detour_ratio", "distance"}};
  for (const auto& n : world::UserProfile::visible_names()) l.user.push_back({n, "user"});
  for (const auto& n : world::Scenario::column_names()) l.scenario.push_back({n, "scenario"});
  return l;
}

FieldPartition FieldPartition::from_layout(const FeatureLayout& layout) {
  FieldPartition p;
  auto slot = [&p](const std::string& field) {
    auto it = std::find(p.names.begin(), p.names.end(), field);
    if (it != p.names.end()) return static_cast<std::size_t>(it - p.names.begin());
    p.names.push_back(field);
    p.route_cols.emplace_back();
    p.pair_cols.emplace_back();
    return p.names.size() - 1;
  };
  for (std::size_t c = 0; c < layout.route.size(); ++c) p.route_cols[slot(layout.route[c].field)].push_back(static_cast<Index>(c));
  for (std::size_t c = 0; c < layout.pair.size(); ++c) p.pair_cols[slot(layout.pair[c].field)].push_back(static_cast<Index>(c));
  if (p.size() < 2) throw std::invalid_argument("field partition needs at least two fields");
  p.validate(static_cast<Index>(layout.route.size()), static_cast<Index>(layout.pair.size()));
  return p;
}

FieldPartition FieldPartition::single(Index route_width, Index pair_width) {
  FieldPartition p;
  p.names = {"all"};
  p.route_cols.resize(1);
  p.pair_cols.resize(1);
  for (Index c = 0; c < route_width; ++c) p.route_cols[0].push_back(c);
  for (Index c = 0; c < pair_width; ++c) p.pair_cols[0].push_back(c);
  return p;
}

FieldPartition FieldPartition::round_robin(Index route_width, Index pair_width, int m) {
  if (m < 1) throw std::invalid_argument("round_robin partition needs m >= 1");
  FieldPartition p;
  p.route_cols.resize(static_cast<std::size_t>(m));
  p.pair_cols.resize(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) p.names.push_back("field" + std::to_string(k));
  for (Index c = 0; c < route_width; ++c) p.route_cols[static_cast<std::size_t>(c % m)].push_back(c);
  for (Index c = 0; c < pair_width; ++c) p.pair_cols[static_cast<std::size_t>(c % m)].push_back(c);
  return p;
}

void FieldPartition::validate(Index route_width, Index pair_width) const {
  if (names.empty() || route_cols.size() != names.size() || pair_cols.size() != names.size()) {
    throw std::invalid_argument("field partition: inconsistent field lists");
  }
  auto check = [&](const std::vector<std::vector<Index>>& groups, Index width, const char* block) {
    std::vector<int> hits(static_cast<std::size_t>(width), 0);
    for (const auto& g : groups) {
      for (Index c : g) {
        if (c < 0 || c >= width) {
          throw std::invalid_argument(std::string("field partition: ") + block + " column " +
                                      std::to_string(c) + " out of range");
        }
        ++hits[static_cast<std::size_t>(c)];
      }
    }
    for (Index c = 0; c < width; ++c) {
      if (hits[static_cast<std::size_t>(c)] != 1) {
        throw std::invalid_argument(std::string("field partition: ") + block + " column " +
                                    std::to_string(c) + " assigned " +
                                    std::to_string(hits[static_cast<std::size_t>(c)]) + " times");
      }
    }
  };
  check(route_cols, route_width, "route");
  check(pair_cols, pair_width, "pair");
}

std::vector<Index> ComparisonLayout::user_columns() const {
  std::vector<Index> cols;
  for (Index c = 0; c < history_width; ++c) cols.push_back(own_history() + c);
  for (Index c = 0; c < history_width; ++c) cols.push_back(other_history() + c);
  for (Index c = 0; c < user_width; ++c) cols.push_back(user() + c);
  return cols;
}

std::vector<Index> ComparisonLayout::comparison_columns(const FieldPartition& p, int m) const {
  std::vector<Index> cols;
  const auto& rc = p.route_cols.at(static_cast<std::size_t>(m));
  const auto& pc = p.pair_cols.at(static_cast<std::size_t>(m));
  for (Index c : rc) cols.push_back(own_route() + c);
  for (Index c : rc) cols.push_back(other_route() + c);
  for (Index c : pc) cols.push_back(pair_forward() + c);
  for (Index c : pc) cols.push_back(pair_backward() + c);
  return cols;
}

std::vector<std::vector<Index>> ComparisonLayout::field_columns(const FieldPartition& p) const {
  p.validate(route_width, pair_width);
  const auto shared = user_columns();
  std::vector<std::vector<Index>> out;
  for (int m = 0; m < p.size(); ++m) {
    auto cols = comparison_columns(p, m);
    cols.insert(cols.end(), shared.begin(), shared.end());
    out.push_back(std::move(cols));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

void validate_sample(const Sample& s) {
  const Index n = s.n_routes();
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("sample " + s.sample_id + ": " + what);
  };
  if (n < 1) fail("no candidate routes");
  if (static_cast<Index>(s.routes.size()) != n) fail("routes/x_r row count mismatch");
  if (s.x_c.n != n) fail("x_c is not N x N");
  if (static_cast<Index>(s.y_r.size()) != n || s.y_e.rows() != n || s.y_e.cols() != n) fail("label shape mismatch");
  if (s.l < 0 || s.l >= n) fail("label index out of range");
  if (!s.x_r.allFinite() || !s.x_u.allFinite() || !s.x_s.allFinite()) fail("non-finite feature");
  for (double v : s.x_c.values) {
    if (!std::isfinite(v)) fail("non-finite x_c");
  }
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < s.x_c.width; ++k) {
      if (s.x_c(i, i, k) != 0.0) fail("x_c diagonal is not zero");
    }
  }
  double ones = 0.0;
  for (double v : s.y_r) ones += v;
  if (ones != 1.0 || s.y_r[static_cast<std::size_t>(s.l)] != 1.0) fail("y_r is not one-hot at l");
  if (!s.crs.empty()) {
    const auto labels = world::make_labels(s.crs);
    if (labels.l != s.l) fail("l disagrees with coverage rates");
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (labels.y_e[i][j] != s.y_e(i, j)) fail("y_e disagrees with coverage rates");
  }
}

// ---------------------------------------------------------------------------
// Features

std::pair<std::vector<int>, std::vector<int>> non_overlap_segments(const world::Route& r_i,
                                                                   const world::Route& r_j) {
  const std::unordered_set<int> a(r_i.edge_ids.begin(), r_i.edge_ids.end());
  const std::unordered_set<int> b(r_j.edge_ids.begin(), r_j.edge_ids.end());
  std::pair<std::vector<int>, std::vector<int>> out;
  for (int id : r_i.edge_ids)
    if (!b.contains(id)) out.first.push_back(id);
  for (int id : r_j.edge_ids)
    if (!a.contains(id)) out.second.push_back(id);
  return out;
}

PairFeatures comparison_features(std::span<const world::Route> routes, const world::RoadGraph& g,
                                 const world::Scenario& sc) {
  const auto n = static_cast<Index>(routes.size());
  PairFeatures x(n, 10);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto [seg_ij, seg_ji] = non_overlap_segments(routes[i], routes[j]);
      const auto s = world::segment_stats(g, routes[i], seg_ij, sc);
      double other_len = 0.0;
      for (int id : seg_ji) other_len += g.edge(id).length_m;
      x(i, j, 0) = s.length_m / 1000.0;
      x(i, j, 1) = s.eta_s / 60.0;
      x(i, j, 2) = s.tolls;
      x(i, j, 3) = s.lights;
      x(i, j, 4) = s.turns;
      x(i, j, 5) = s.mean_heat;
      x(i, j, 6) = s.class_share[0];
      x(i, j, 7) = s.class_share[1];
      x(i, j, 8) = s.class_share[2];
      x(i, j, kDetourRatioColumn) = s.length_m / std::max(1.0, other_len);
    }
  }
  return x;
}

FeatureMatrix route_features(std::span<const world::Route> routes, const world::RoadGraph& g,
                             const world::Scenario& sc, std::span<const double> recall_scores) {
  const auto n = static_cast<Index>(routes.size());
  if (static_cast<Index>(recall_scores.size()) != n) {
    throw std::invalid_argument("route_features: one recall score per route required");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return recall_scores[a] > recall_scores[b]; });
  std::vector<double> rank(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) rank[static_cast<std::size_t>(order[r])] = static_cast<double>(r);

  FeatureMatrix x(n, 12);
  for (Index i = 0; i < n; ++i) {
    const auto s = world::route_stats(g, routes[i], sc);
    x.row(i) << s.eta_s / 60.0, s.freeflow_eta_s / 60.0, s.length_m / 1000.0, s.tolls, s.lights, s.turns,
        s.mean_heat, s.class_share[0], s.class_share[1], s.class_share[2], recall_scores[i],
        rank[static_cast<std::size_t>(i)];
  }
  return x;
}

FeatureMatrix history_representation(const FeatureMatrix& history_routes, const FeatureMatrix& x_r) {
  FeatureMatrix out = FeatureMatrix::Zero(x_r.rows(), x_r.cols());
  if (history_routes.rows() == 0) return out;
  if (history_routes.cols() != x_r.cols()) {
    throw std::invalid_argument("history_representation: history rows must use the x_r layout");
  }
  for (Index i = 0; i < x_r.rows(); ++i) {
    Eigen::VectorXd logits = history_routes * x_r.row(i).transpose();
    const double mx = logits.maxCoeff();
    Eigen::VectorXd w = (logits.array() - mx).exp();
    w /= w.sum();
    out.row(i) = w.transpose() * history_routes;
  }
  return out;
}

FeatureMatrix history_matrix(const Sample& s) {
  FeatureMatrix h(static_cast<Index>(s.history.size()), s.x_r.cols());
  for (std::size_t t = 0; t < s.history.size(); ++t) h.row(static_cast<Index>(t)) = s.history[t].route;
  return h;
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

struct ColumnAccumulator {
  Eigen::VectorXd sum, sq;
  double count = 0.0;
  explicit ColumnAccumulator(Index w) : sum(Eigen::VectorXd::Zero(w)), sq(Eigen::VectorXd::Zero(w)) {}
  void add(const double* row) {
    for (Index c = 0; c < sum.size(); ++c) {
      sum[c] += row[c];
      sq[c] += row[c] * row[c];
    }
    count += 1.0;
  }
  std::pair<FeatureRow, FeatureRow> finish() const {
    FeatureRow mean = FeatureRow::Zero(sum.size());
    FeatureRow sd = FeatureRow::Ones(sum.size());
    if (count > 0) {
      for (Index c = 0; c < sum.size(); ++c) {
        mean[c] = sum[c] / count;
        const double var = std::max(0.0, sq[c] / count - mean[c] * mean[c]);
        sd[c] = std::max(kStdFloor, std::sqrt(var));
      }
    }
    return {mean, sd};
  }
};

}  // namespace

NormStats fit_normalize(std::span<const Sample> train) {
  if (train.empty()) throw std::invalid_argument("fit_normalize: empty training split");
  const Index fr = train[0].x_r.cols(), fc = train[0].x_c.width, fu = train[0].x_u.size();
  ColumnAccumulator route(fr), pair(fc), user(fu);
  for (const auto& s : train) {
    for (Index i = 0; i < s.x_r.rows(); ++i) route.add(s.x_r.row(i).data());
    for (Index i = 0; i < s.x_c.n; ++i)
      for (Index j = 0; j < s.x_c.n; ++j)
        if (i != j) pair.add(s.x_c.cell(i, j).data());
    user.add(s.x_u.data());
  }
  NormStats st;
  std::tie(st.route_mean, st.route_std) = route.finish();
  std::tie(st.pair_mean, st.pair_std) = pair.finish();
  std::tie(st.user_mean, st.user_std) = user.finish();
  st.fitted = true;
  return st;
}

Sample apply_normalize(const Sample& s, const NormStats& stats) {
  if (!stats.fitted) throw std::logic_error("apply_normalize called before fit_normalize");
  if (stats.route_mean.size() != s.x_r.cols() || stats.pair_mean.size() != s.x_c.width ||
      stats.user_mean.size() != s.x_u.size()) {
    throw std::invalid_argument("apply_normalize: stats layout does not match sample " + s.sample_id);
  }
  Sample out = s;
  auto z_rows = [&](FeatureMatrix& m) {
    for (Index i = 0; i < m.rows(); ++i)
      m.row(i) = (m.row(i) - stats.route_mean).cwiseQuotient(stats.route_std);
  };
  z_rows(out.x_r);
  for (auto& h : out.history) h.route = (h.route - stats.route_mean).cwiseQuotient(stats.route_std);
  out.x_u = (s.x_u - stats.user_mean).cwiseQuotient(stats.user_std);
  for (Index i = 0; i < s.x_c.n; ++i) {
    for (Index j = 0; j < s.x_c.n; ++j) {
      for (Index k = 0; k < s.x_c.width; ++k) {
        out.x_c(i, j, k) = i == j ? 0.0 : (s.x_c(i, j, k) - stats.pair_mean[k]) / stats.pair_std[k];
      }
    }
  }
  return out;
}

}  // namespace ccn
