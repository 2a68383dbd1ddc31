#include "ccn/dataset.hpp"
#include "ccn/features.hpp"
#include "ccn/model.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace ccn;
namespace w = ccn::world;

namespace {

w::RoadGraph fig2_graph() {
  // Routes share approach and exit; in the middle route 3 loops 600 m where route 1 runs 100 m.
  w::RoadGraph g;
  g.nodes = {{0, 0}, {1000, 0}, {1100, 0}, {1050, 290}, {2100, 0}};
  auto add = [&g](int from, int to, double len, bool toll = false) {
    w::Edge e;
    e.id = static_cast<int>(g.edges.size());
    e.from = from;
    e.to = to;
    e.length_m = len;
    e.base_speed_kmh = 40.0;
    e.toll = toll;
    e.heat = 0.5;
    e.road_class = 1;
    e.congestion = {1.5, 1.2, 1.0};
    g.edges.push_back(e);
  };
  add(0, 1, 1000.0);
  add(1, 2, 100.0, true);
  add(1, 3, 300.0);
  add(3, 2, 300.0);
  add(2, 4, 1000.0);
  g.rebuild_adjacency();
  return g;
}

const Dataset& small_dataset() {
  static const Dataset ds = [] {
    DatasetConfig cfg;
    cfg.n_samples = 60;
    cfg.n_users = 20;
    return generate_dataset(cfg, 5);
  }();
  return ds;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("non-overlapping segments are set differences in route order") {
  const w::Route a{{1, 2, 3}}, b{{1, 4, 3}};
  const auto [ab, ba] = non_overlap_segments(a, b);
  CHECK(ab == std::vector<int>{2});
  CHECK(ba == std::vector<int>{4});
  const auto [same1, same2] = non_overlap_segments(a, a);
  CHECK(same1.empty());
  CHECK(same2.empty());
  const w::Route c{{7, 8}};
  CHECK(non_overlap_segments(a, c).first == a.edge_ids);
}

TEST_CASE("six times longer local detour gives a detour ratio of 6") {
  const auto g = fig2_graph();
  const std::vector<w::Route> routes{{{0, 1, 4}}, {{0, 2, 3, 4}}};
  const auto x = comparison_features(routes, g, w::Scenario{});
  CHECK(x(1, 0, kDetourRatioColumn) == doctest::Approx(6.0));
  CHECK(x(0, 1, kDetourRatioColumn) == doctest::Approx(1.0 / 6.0));
  CHECK(x(1, 0, 0) == doctest::Approx(0.6));
  CHECK(x(0, 1, 2) == 1.0);  // the direct link carries the toll
  CHECK(x(1, 0, 2) == 0.0);
  for (Index k = 0; k < x.width; ++k) {
    CHECK(x(0, 0, k) == 0.0);
    CHECK(x(1, 1, k) == 0.0);
  }
}

TEST_CASE("contained routes floor the detour denominator at one metre") {
  const auto g = fig2_graph();
  const std::vector<w::Route> routes{{{0, 1}}, {{0, 1, 4}}};
  const auto x = comparison_features(routes, g, w::Scenario{});
  CHECK(x(1, 0, kDetourRatioColumn) == doctest::Approx(1000.0));
  CHECK(x(0, 1, kDetourRatioColumn) == 0.0);
}

TEST_CASE("route ETA equals the per-edge sum") {
  const auto g = fig2_graph();
  const std::vector<w::Route> routes{{{0, 1, 4}}, {{0, 2, 3, 4}}, {{0, 1, 4}}};
  w::Scenario peak;
  peak.time_band = w::TimeBand::Peak;
  const std::vector<double> scores{-1.0, -2.0, -1.5};
  const auto x = route_features(routes, g, peak, scores);
  for (Index i = 0; i < 3; ++i) {
    double eta = 0.0, len = 0.0;
    for (int id : routes[static_cast<std::size_t>(i)].edge_ids) {
      const auto& e = g.edge(id);
      eta += e.length_m / (e.base_speed_kmh / 3.6 / w::congestion_factor(e, peak));
      len += e.length_m;
    }
    CHECK(x(i, kEtaColumn) == doctest::Approx(eta / 60.0));
    CHECK(x(i, kLengthColumn) == doctest::Approx(len / 1000.0));
    CHECK(x.row(i).allFinite());
  }
  // identical routes, identical item features apart from the recall columns
  CHECK(x.row(0).head(kRecallScoreColumn) == x.row(2).head(kRecallScoreColumn));
  std::vector<double> ranks{x(0, kRecallRankColumn), x(1, kRecallRankColumn), x(2, kRecallRankColumn)};
  CHECK(ranks == std::vector<double>{0.0, 2.0, 1.0});
}

TEST_CASE("history pooling degenerates correctly") {
  FeatureMatrix x_r = FeatureMatrix::Random(4, 3);
  CHECK(history_representation(FeatureMatrix(0, 3), x_r).isZero());
  FeatureMatrix one = FeatureMatrix::Random(1, 3);
  const auto h1 = history_representation(one, x_r);
  for (Index i = 0; i < 4; ++i) CHECK((h1.row(i) - one.row(0)).norm() < 1e-12);

  FeatureMatrix hist = FeatureMatrix::Random(5, 3);
  const auto h = history_representation(hist, x_r);
  for (Index i = 0; i < 4; ++i) {
    Eigen::VectorXd logits = hist * x_r.row(i).transpose();
    Eigen::VectorXd wts = (logits.array() - logits.maxCoeff()).exp();
    wts /= wts.sum();
    CHECK(wts.sum() == doctest::Approx(1.0));
    const Eigen::RowVectorXd expect = wts.transpose() * hist;
    CHECK((h.row(i) - expect).norm() < 1e-12);
  }
}

TEST_CASE("generated pair features are asymmetric and vary across partners") {
  int asym = 0, varying = 0, samples = 0;
  for (const auto& s : small_dataset().samples) {
    validate_sample(s);
    const Index n = s.n_routes();
    ++samples;
    bool any_asym = false, any_vary = false;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto a = s.x_c.cell(i, j), b = s.x_c.cell(j, i);
        any_asym = any_asym || !std::equal(a.begin(), a.end(), b.begin());
        for (Index k = 0; k < n; ++k) {
          if (k == i || k == j) continue;
          const auto c = s.x_c.cell(i, k);
          any_vary = any_vary || !std::equal(a.begin(), a.end(), c.begin());
        }
      }
    }
    asym += any_asym;
    varying += any_vary;
  }
  CHECK(asym == samples);
  CHECK(varying == samples);
}

TEST_CASE("a pair entry depends only on its two routes") {
  const auto& ds = small_dataset();
  const auto& s = ds.samples[3];
  std::vector<w::Route> shuffled(s.routes.rbegin(), s.routes.rend());
  const w::Scenario sc;
  const auto a = comparison_features(s.routes, ds.graph, sc);
  const auto b = comparison_features(shuffled, ds.graph, sc);
  const Index n = s.n_routes();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < a.width; ++k) CHECK(a(i, j, k) == b(n - 1 - i, n - 1 - j, k));
}

TEST_CASE("normalization uses frozen train stats and keeps the diagonal zero") {
  const auto& ds = small_dataset();
  const auto train = select_split(ds.samples, "train");
  const auto test = select_split(ds.samples, "test");
  REQUIRE_FALSE(test.empty());
  const auto stats = fit_normalize(train);
  CHECK_THROWS_AS(apply_normalize(train[0], NormStats{}), std::logic_error);

  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(train[0].x_r.cols());
  double rows = 0.0;
  for (const auto& s : train) {
    const auto z = apply_normalize(s, stats);
    sum += z.x_r.colwise().sum();
    rows += static_cast<double>(z.x_r.rows());
    for (Index i = 0; i < z.n_routes(); ++i)
      for (Index k = 0; k < z.x_c.width; ++k) CHECK(z.x_c(i, i, k) == 0.0);
  }
  CHECK((sum / rows).cwiseAbs().maxCoeff() < 1e-5);
  for (Index c = 0; c < stats.route_std.size(); ++c) CHECK(stats.route_std[c] >= kStdFloor);

  const auto z = apply_normalize(test[0], stats);
  const double expect = (test[0].x_r(0, 0) - stats.route_mean[0]) / stats.route_std[0];
  CHECK(z.x_r(0, 0) == doctest::Approx(expect));
  // refitting on the test split would give different numbers
  const auto own = fit_normalize(test);
  CHECK(own.route_mean[0] != stats.route_mean[0]);
}

TEST_CASE("constant columns normalize to zero") {
  auto samples = select_split(small_dataset().samples, "train");
  for (auto& s : samples) s.x_u[0] = 3.0;
  const auto stats = fit_normalize(samples);
  CHECK(stats.user_std[0] == doctest::Approx(kStdFloor));
  CHECK(apply_normalize(samples[0], stats).x_u[0] == 0.0);
}

TEST_CASE("field partition is exact and shares the user block") {
  const auto layout = FeatureLayout::standard();
  const auto p = FieldPartition::from_layout(layout);
  CHECK(p.names == std::vector<std::string>{"time", "distance", "toll", "comfort", "familiarity"});
  const auto cfg = ModelConfig::for_layout(layout, 8);
  const auto cl = cfg.comparison_layout();
  const auto cols = cl.field_columns(p);
  const auto shared = cl.user_columns();
  std::vector<Index> comparison;
  for (int m = 0; m < p.size(); ++m) {
    const auto own = cl.comparison_columns(p, m);
    comparison.insert(comparison.end(), own.begin(), own.end());
    for (Index u : shared) CHECK(std::count(cols[static_cast<std::size_t>(m)].begin(), cols[static_cast<std::size_t>(m)].end(), u) == 1);
  }
  std::vector<Index> all = comparison;
  all.insert(all.end(), shared.begin(), shared.end());
  std::sort(all.begin(), all.end());
  std::vector<Index> expect(static_cast<std::size_t>(cl.width()));
  std::iota(expect.begin(), expect.end(), Index{0});
  CHECK(all == expect);  // disjoint and covering

  const auto single = FieldPartition::single(cfg.route_width, cfg.pair_width);
  CHECK(cl.field_columns(single)[0].size() == static_cast<std::size_t>(cl.width()));

  FieldPartition broken = p;
  broken.route_cols[0].push_back(broken.route_cols[1][0]);
  CHECK_THROWS_AS(broken.validate(cfg.route_width, cfg.pair_width), std::invalid_argument);
}

TEST_CASE("gather_fields splits C^E by column lists") {
  std::mt19937_64 rng(2);
  const auto c_e = test::random_tensor({1, 2, 2, 6}, rng);
  const std::vector<std::vector<Index>> cols{{0, 5}, {1, 2, 3, 4}};
  const auto parts = gather_fields(c_e, cols);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].at({0, 1, 0, 1}) == c_e.at({0, 1, 0, 5}));
  CHECK(parts[1].at({0, 0, 1, 3}) == c_e.at({0, 0, 1, 4}));
  CHECK_THROWS_AS(gather_fields(c_e, {{6}}), DimensionError);
}

}  // TEST_SUITE
