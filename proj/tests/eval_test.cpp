#include "ccn/config.hpp"
#include "ccn/diagnostics.hpp"
#include "ccn/eval.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace ccn;

namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a) {
    if (!y[a]) continue;
    for (std::size_t b = 0; b < s.size(); ++b) {
      if (y[b]) continue;
      pairs += 1.0;
      wins += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

/// Route block sized for the standard layout with chosen length, eta and recall score.
Sample baseline_sample(std::vector<double> length, std::vector<double> eta, std::vector<double> recall,
                       std::vector<double> crs) {
  const auto n = static_cast<Index>(length.size());
  Sample s;
  s.x_r = FeatureMatrix::Zero(n, 12);
  for (Index i = 0; i < n; ++i) {
    s.x_r(i, kLengthColumn) = length[static_cast<std::size_t>(i)];
    s.x_r(i, kEtaColumn) = eta[static_cast<std::size_t>(i)];
    s.x_r(i, kRecallScoreColumn) = recall[static_cast<std::size_t>(i)];
  }
  s.crs = std::move(crs);
  const auto labels = world::make_labels(s.crs);
  s.l = labels.l;
  s.y_e = FeatureMatrix(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) s.y_e(i, j) = labels.y_e[i][j];
  s.y_r = labels.y_r;
  return s;
}

}  // namespace

TEST_SUITE("eval-cli") {

TEST_CASE("auc hand values") {
  CHECK(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75);
  CHECK(auc(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 0}) == 0.5);
  CHECK(auc(std::vector<double>{0.2, 0.9}, std::vector<int>{1, 0}) == 0.0);
  CHECK(std::isnan(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1})));
  CHECK_THROWS_AS(auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), std::invalid_argument);
}

TEST_CASE("auc matches the pairwise oracle with ties") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> len(2, 400), level(0, 9), bit(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = len(rng);
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      s[static_cast<std::size_t>(k)] = level(rng) / 10.0;
      y[static_cast<std::size_t>(k)] = bit(rng);
    }
    y[0] = 1;
    y[1] = 0;
    CHECK(auc(s, y) == doctest::Approx(brute_auc(s, y)).epsilon(1e-12));
  }
}

TEST_CASE("single-criterion baselines pick by their column with first-index ties") {
  const auto s = baseline_sample({5.0, 3.0, 3.0, 4.0}, {9.0, 10.0, 8.0, 8.0}, {0.1, 0.3, 0.3, 0.2},
                                 {0.4, 0.6, 0.9, 0.3});
  CHECK(baseline_pick(s, Baseline::ShortestDistance) == 1);
  CHECK(baseline_pick(s, Baseline::ShortestTime) == 2);
  CHECK(baseline_pick(s, Baseline::Recall) == 1);
  const auto t = baseline_sample({1.0, 2.0}, {2.0, 1.0}, {0.0, 1.0}, {0.2, 0.8});
  const std::vector<Sample> set{s, t};
  CHECK(run_baseline(set, Baseline::ShortestDistance).cr_off == doctest::Approx((0.6 + 0.2) / 2));
  CHECK(run_baseline(set, Baseline::ShortestTime).top1_acc == doctest::Approx(1.0));
  CHECK(oracle_cr(set) == doctest::Approx((0.9 + 0.8) / 2));
}

TEST_CASE("scoring of fixed predictions") {
  const auto s = baseline_sample({1, 1, 1}, {1, 1, 1}, {0, 0, 0}, {0.2, 0.7, 0.5});
  Prediction p;
  p.p_r = {0.6, 0.3, 0.1};
  p.p_e = FeatureMatrix(3, 3);
  p.p_e << 0.5, 0.2, 0.7, 0.8, 0.5, 0.4, 0.3, 0.6, 0.5;
  const auto r = score_predictions({s}, {p});
  CHECK(r.cr_off == doctest::Approx(0.2));
  CHECK(r.top1_acc == 0.0);
  // masked cells around l = 1: (1,0)=0.8 y1, (1,2)=0.4 y1, (0,1)=0.2 y0, (2,1)=0.6 y0
  CHECK(r.pair_auc == doctest::Approx(0.75));
  CHECK(r.pair_auc_macro == doctest::Approx(0.75));
  CHECK(argmax_first(std::vector<double>{0.2, 0.5, 0.5}) == 1);
}

TEST_CASE("explanations decompose the pair probability") {
  const auto cfg = tiny_config();
  const auto samples = synthetic_samples(cfg, 20, 13);
  CcnModel<float> model(cfg, 2);
  randomize_params(model.params(), 6);
  for (const auto& s : samples) {
    const auto batch = make_batch<float>(s);
    const auto a = model.forward(batch, Mode::Eval);
    const auto pooled = original_pairs(batch, a.pooled, 0);
    const auto p_e = original_pairs(batch, a.p_e, 0);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const auto e = explain(model, s, i, j);
        CHECK(e.fields == cfg.fields.names);
        CHECK(e.sum == static_cast<float>(pooled(i, j)));
        CHECK(std::abs(1.0 / (1.0 + std::exp(-static_cast<double>(e.sum))) - e.p_e) < 1e-6);
        CHECK(e.p_e == static_cast<float>(p_e(i, j)));
        if (i == j) {
          for (float v : e.scores) CHECK(v == 0.0f);
          CHECK(e.p_e == 0.5f);
        }
        for (std::size_t k = 1; k < e.ranked.size(); ++k)
          CHECK(std::fabs(e.scores[e.ranked[k - 1]]) >= std::fabs(e.scores[e.ranked[k]]));
      }
    }
    int rec = -1;
    const auto all = explain_recommendation(model, s, &rec);
    CHECK(all.size() == 2);
    CHECK(rec == argmax_first(original_order(batch, a.p_r, 0)));
    for (const auto& e : all) CHECK(e.i == rec);
  }
  CHECK_THROWS_AS(explain(model, samples[0], 0, 3), std::out_of_range);
  CHECK_FALSE(explain(model, samples[0], 0, 1).render().empty());

  auto plain = cfg;
  plain.use_ps = plain.distill = false;
  CcnModel<float> unconstrained(plain, 2);
  CHECK_THROWS_AS(explain(unconstrained, samples[0], 0, 1), UnsupportedOperation);
}

TEST_CASE("ablation grid and csv") {
  const auto grid = default_ablation_grid();
  std::vector<std::string> names;
  for (const auto& v : grid) names.push_back(v.name);
  CHECK(names == std::vector<std::string>{"pointwise", "self_attention", "ccn_no_xc", "ccn", "ccn_plain_ps",
                                          "ccn_unconstrained"});
  for (const auto& v : grid) {
    auto c = tiny_config();
    c.use_xc = v.use_xc;
    c.use_cco = v.use_cco;
    c.use_ps = v.use_ps;
    c.distill = v.distill;
    CHECK(c.name() == v.name);
  }

  AblationSetup setup;
  setup.base = tiny_config();
  setup.train.epochs = 1;
  setup.train.batch_size = 8;
  setup.seeds = {1, 2};
  const auto data = synthetic_samples(setup.base, 24, 4);
  int lines = 0;
  const auto rows = run_ablation(data, data, {grid[0], grid[3]}, setup, [&lines](const std::string&) { ++lines; });
  REQUIRE(rows.size() == 2);
  CHECK(lines >= 4);
  CHECK(rows[1].runs.size() == 2);
  const double crs[2] = {rows[1].runs[0].cr_off, rows[1].runs[1].cr_off};
  const auto [mean, sd] = mean_std(crs);
  CHECK(rows[1].cr_mean == doctest::Approx(mean));
  CHECK(rows[1].cr_std == doctest::Approx(sd));
  const auto csv = ablation_csv(rows);
  CHECK(csv.rfind("model,use_xc,use_cco,use_ps,distill,seeds,cr_off_mean", 0) == 0);
  CHECK(csv.find("\nccn,1,1,1,1,1;2,") != std::string::npos);
}

TEST_CASE("mean and sample standard deviation") {
  const double v[4] = {1.0, 2.0, 3.0, 4.0};
  const auto [m, s] = mean_std(v);
  CHECK(m == 2.5);
  CHECK(s == doctest::Approx(std::sqrt(5.0 / 3.0)));
}

TEST_CASE("config parsing") {
  const auto rc = parse_config(R"(
# comment
[dataset]
n_samples = 300
n_routes = 6

[model]
widths = 16, 8, 4, 1
use_xc = false
lambda = 0.2

[train]
epochs = 3
lr = 0.01

[ablation]
seeds = 4, 5
)");
  CHECK(rc.dataset.n_samples == 300);
  CHECK(rc.dataset.n_routes == 6);
  CHECK(rc.model.widths == std::array<int, 4>{16, 8, 4, 1});
  CHECK_FALSE(rc.model.use_xc);
  CHECK(rc.model.lambda == 0.2);
  CHECK(rc.train.epochs == 3);
  CHECK(rc.seeds == std::vector<std::uint64_t>{4, 5});

  const auto layout = FeatureLayout::standard();
  const auto mc = model_for_layout(rc, layout);
  CHECK(mc.n_routes == 6);
  CHECK(mc.route_width == static_cast<Index>(layout.route.size()));
  CHECK(mc.widths == rc.model.widths);

  CHECK_THROWS_AS(parse_config("[nonsense]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nwidth = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nwidths = 1, 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nepochs = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nuse_xc = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[dataset]\nn_samples = -4\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), ConfigError);

  const auto paper = parse_config("[features]\nroute_width = 35\npair_width = 25\nuser_width = 10\n");
  CHECK(paper.has_feature_override);
  const auto pm = model_from_features(paper);
  CHECK(pm.comparison_layout().width() == 200);
  CHECK(pm.fields.size() == 5);
}

}  // TEST_SUITE
