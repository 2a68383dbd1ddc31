#include "ccn/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ccn {

namespace {

using json = nlohmann::json;

// Stored features carry 1e-4 resolution; the in-memory sample is rounded
// identically so a write/read cycle is exact.
double quantize(double v) { return std::round(v * 1e4) / 1e4; }

world::Scenario random_scenario(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  world::Scenario sc;
  const double t = unit(rng);
  sc.time_band = t < 0.35 ? world::TimeBand::Peak : (t < 0.8 ? world::TimeBand::Offpeak : world::TimeBand::Night);
  sc.vehicle = unit(rng) < 0.15 ? world::Vehicle::Truck : world::Vehicle::Car;
  sc.day = unit(rng) < 2.0 / 7.0 ? world::DayKind::Weekend : world::DayKind::Weekday;
  return sc;
}

struct Trip {
  world::Scenario scenario;
  world::RecallResult recall;
};

// Draws o/d pairs until recall yields at least `min_routes` (and at most
// `n_routes`) candidates. Counts rejected draws in `discarded`.
Trip draw_trip(const world::RoadGraph& g, const DatasetConfig& cfg, std::mt19937_64& rng, int min_routes,
               int& discarded) {
  std::uniform_int_distribution<int> node(0, g.node_count() - 1);
  for (int attempt = 0; attempt < cfg.max_od_attempts; ++attempt) {
    Trip trip;
    trip.scenario = random_scenario(rng);
    const int o = node(rng), d = node(rng);
    if (o == d) continue;
    const auto& po = g.nodes[static_cast<std::size_t>(o)];
    const auto& pd = g.nodes[static_cast<std::size_t>(d)];
    if (std::hypot(po.x - pd.x, po.y - pd.y) < cfg.min_trip_m) continue;
    auto recall = world::recall_alternatives(g, trip.scenario, o, d, cfg.n_routes, cfg.recall);
    if (!recall || static_cast<int>(recall->routes.size()) < min_routes) {
      ++discarded;
      continue;
    }
    trip.recall = std::move(*recall);
    return trip;
  }
  throw world::GenerationError("generate_dataset: no usable origin/destination pair within attempt budget");
}

struct PoolUser {
  world::UserProfile profile;
  std::vector<HistoryRecord> history;
};

}  // namespace

Dataset generate_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
  if (cfg.n_samples < 1 || cfg.n_routes < 2 || cfg.n_users < 1) {
    throw std::invalid_argument("generate_dataset: need samples >= 1, n_routes >= 2, users >= 1");
  }
  Dataset ds;
  ds.graph = world::generate_graph(cfg.graph, seed);
  ds.layout = FeatureLayout::standard();
  const auto& g = ds.graph;

  std::vector<PoolUser> users(static_cast<std::size_t>(cfg.n_users));
  for (int u = 0; u < cfg.n_users; ++u) {
    auto rng = world::derived_rng(seed, 1, static_cast<std::uint64_t>(u));
    auto& pu = users[static_cast<std::size_t>(u)];
    pu.profile = world::sample_user(rng, cfg.users);
    world::ChoiceConfig no_dev = cfg.choice;
    no_dev.deviation_prob = 0.0;
    for (int t = 0; t < cfg.history_len; ++t) {
      int ignored = 0;
      Trip trip = draw_trip(g, cfg, rng, 2, ignored);
      const auto choice = world::simulate_choice(g, pu.profile, trip.scenario, trip.recall.routes, rng, no_dev);
      const FeatureMatrix rows = route_features(trip.recall.routes, g, trip.scenario, trip.recall.recall_score);
      HistoryRecord rec;
      rec.scenario = trip.scenario.one_hot();
      rec.route = rows.row(choice.index).unaryExpr(&quantize);
      pu.history.push_back(std::move(rec));
    }
  }

  const int n_test = static_cast<int>(std::lround(cfg.n_samples * cfg.test_fraction));
  const int first_test = cfg.n_samples - n_test;
  ds.samples.reserve(static_cast<std::size_t>(cfg.n_samples));
  for (int s = 0; s < cfg.n_samples; ++s) {
    auto rng = world::derived_rng(seed, 2, static_cast<std::uint64_t>(s));
    std::uniform_int_distribution<int> pick_user(0, cfg.n_users - 1);
    const auto& user = users[static_cast<std::size_t>(pick_user(rng))];
    Trip trip = draw_trip(g, cfg, rng, cfg.n_routes, ds.discarded);
    const auto& routes = trip.recall.routes;
    const auto choice = world::simulate_choice(g, user.profile, trip.scenario, routes, rng, cfg.choice);

    Sample smp;
    std::ostringstream id;
    id << 's' << std::setw(6) << std::setfill('0') << s;
    smp.sample_id = id.str();
    smp.split = s < first_test ? "train" : "test";
    smp.routes = routes;
    smp.x_r = route_features(routes, g, trip.scenario, trip.recall.recall_score).unaryExpr(&quantize);
    smp.x_c = comparison_features(routes, g, trip.scenario);
    for (auto& v : smp.x_c.values) v = quantize(v);
    const auto visible = user.profile.visible();
    smp.x_u = Eigen::Map<const FeatureRow>(visible.data(), static_cast<Index>(visible.size())).unaryExpr(&quantize);
    const auto onehot = trip.scenario.one_hot();
    smp.x_s = Eigen::Map<const FeatureRow>(onehot.data(), static_cast<Index>(onehot.size()));
    smp.history = user.history;
    for (const auto& r : routes) smp.crs.push_back(world::coverage_rate(r, choice.trace, g));
    const auto labels = world::make_labels(smp.crs);
    smp.y_r = labels.y_r;
    const auto n = static_cast<Index>(routes.size());
    smp.y_e = FeatureMatrix(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) smp.y_e(i, j) = labels.y_e[i][j];
    smp.l = labels.l;
    ds.samples.push_back(std::move(smp));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Stats

DatasetStats dataset_stats(const std::vector<Sample>& samples, int discarded) {
  DatasetStats st;
  st.samples = static_cast<int>(samples.size());
  st.discarded = discarded;
  std::vector<double> label_hist;
  double detour_sum = 0.0, detour_count = 0.0;
  for (const auto& s : samples) {
    (s.split == "test" ? st.test : st.train) += 1;
    st.n_routes = std::max(st.n_routes, static_cast<int>(s.n_routes()));
    if (static_cast<int>(label_hist.size()) <= s.l) label_hist.resize(static_cast<std::size_t>(s.l) + 1, 0.0);
    label_hist[static_cast<std::size_t>(s.l)] += 1.0;
    if (!s.crs.empty()) {
      st.mean_cr_recall_best += s.crs[0];
      st.mean_cr_best += s.crs[static_cast<std::size_t>(s.l)];
      double mean = 0.0;
      for (double c : s.crs) mean += c;
      st.mean_cr_random += mean / static_cast<double>(s.crs.size());
    }
    for (Index i = 0; i < s.x_c.n; ++i)
      for (Index j = 0; j < s.x_c.n; ++j)
        if (i != j) {
          detour_sum += s.x_c(i, j, kDetourRatioColumn);
          detour_count += 1.0;
        }
  }
  if (st.samples > 0) {
    const double n = st.samples;
    st.mean_cr_recall_best /= n;
    st.mean_cr_best /= n;
    st.mean_cr_random /= n;
    for (double c : label_hist) {
      if (c > 0) st.label_entropy -= (c / n) * std::log(c / n);
    }
  }
  if (detour_count > 0) st.mean_detour_ratio = detour_sum / detour_count;
  return st;
}

std::string DatasetStats::to_text() const {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "samples: " << samples << '\n'
     << "train: " << train << '\n'
     << "test: " << test << '\n'
     << "n_routes: " << n_routes << '\n'
     << "discarded_od: " << discarded << '\n'
     << "label_entropy: " << label_entropy << '\n'
     << "mean_cr_recall_best: " << mean_cr_recall_best << '\n'
     << "mean_cr_best: " << mean_cr_best << '\n'
     << "mean_cr_random: " << mean_cr_random << '\n'
     << "mean_detour_ratio: " << mean_detour_ratio << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON

json sample_to_json(const Sample& s) {
  json j;
  j["sample_id"] = s.sample_id;
  j["split"] = s.split;
  json routes = json::array();
  for (const auto& r : s.routes) routes.push_back(r.edge_ids);
  j["routes"] = std::move(routes);
  const Index n = s.n_routes();
  json xr = json::array();
  for (Index i = 0; i < n; ++i) xr.push_back(std::vector<double>(s.x_r.row(i).begin(), s.x_r.row(i).end()));
  j["x_r"] = std::move(xr);
  j["x_u"] = std::vector<double>(s.x_u.begin(), s.x_u.end());
  j["x_s"] = std::vector<double>(s.x_s.begin(), s.x_s.end());
  json xc = json::array();
  for (Index i = 0; i < n; ++i) {
    json row = json::array();
    for (Index k = 0; k < n; ++k) {
      auto c = s.x_c.cell(i, k);
      row.push_back(std::vector<double>(c.begin(), c.end()));
    }
    xc.push_back(std::move(row));
  }
  j["x_c"] = std::move(xc);
  json hist = json::array();
  for (const auto& h : s.history) {
    hist.push_back({{"scenario", h.scenario}, {"route", std::vector<double>(h.route.begin(), h.route.end())}});
  }
  j["history"] = std::move(hist);
  j["y_r"] = s.y_r;
  json ye = json::array();
  for (Index i = 0; i < n; ++i) ye.push_back(std::vector<double>(s.y_e.row(i).begin(), s.y_e.row(i).end()));
  j["y_e"] = std::move(ye);
  j["l"] = s.l;
  j["crs"] = s.crs;
  return j;
}

namespace {

FeatureRow to_row(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const FeatureRow>(v.data(), static_cast<Index>(v.size()));
}

FeatureMatrix to_matrix(const json& j) {
  const auto rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j.at(0).size()) : 0;
  FeatureMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (static_cast<Index>(j.at(static_cast<std::size_t>(i)).size()) != cols) throw DataError("ragged matrix");
    m.row(i) = to_row(j.at(static_cast<std::size_t>(i)));
  }
  return m;
}

}  // namespace

Sample sample_from_json(const json& j) {
  try {
    Sample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.split = j.value("split", std::string("train"));
    for (const auto& r : j.at("routes")) s.routes.push_back({r.get<std::vector<int>>()});
    s.x_r = to_matrix(j.at("x_r"));
    s.x_u = to_row(j.at("x_u"));
    s.x_s = to_row(j.at("x_s"));
    const auto& xc = j.at("x_c");
    const auto n = static_cast<Index>(xc.size());
    const Index w = n > 0 ? static_cast<Index>(xc.at(0).at(0).size()) : 0;
    s.x_c = PairFeatures(n, w);
    for (Index i = 0; i < n; ++i) {
      if (static_cast<Index>(xc.at(static_cast<std::size_t>(i)).size()) != n) throw DataError("x_c is not square");
      for (Index k = 0; k < n; ++k) {
        const auto cell = xc.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<std::vector<double>>();
        if (static_cast<Index>(cell.size()) != w) throw DataError("ragged x_c");
        std::copy(cell.begin(), cell.end(), s.x_c.values.begin() + (i * n + k) * w);
      }
    }
    for (const auto& h : j.at("history")) {
      s.history.push_back({h.at("scenario").get<std::vector<double>>(), to_row(h.at("route"))});
    }
    s.y_r = j.at("y_r").get<std::vector<double>>();
    s.y_e = to_matrix(j.at("y_e"));
    s.l = j.at("l").get<int>();
    if (j.contains("crs")) s.crs = j.at("crs").get<std::vector<double>>();
    validate_sample(s);
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed sample: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

json layout_to_json(const FeatureLayout& l) {
  auto block = [](const std::vector<ColumnInfo>& cols) {
    json a = json::array();
    for (std::size_t c = 0; c < cols.size(); ++c) {
      a.push_back({{"index", c}, {"name", cols[c].name}, {"field", cols[c].field}});
    }
    return a;
  };
  return {{"x_r", block(l.route)}, {"x_c", block(l.pair)}, {"x_u", block(l.user)}, {"x_s", block(l.scenario)}};
}

FeatureLayout layout_from_json(const json& j) {
  auto block = [](const json& a) {
    std::vector<ColumnInfo> cols(a.size());
    for (const auto& c : a) {
      const auto idx = c.at("index").get<std::size_t>();
      if (idx >= cols.size()) throw DataError("layout column index out of range");
      cols[idx] = {c.at("name").get<std::string>(), c.at("field").get<std::string>()};
    }
    return cols;
  };
  try {
    FeatureLayout l;
    l.route = block(j.at("x_r"));
    l.pair = block(j.at("x_c"));
    l.user = block(j.at("x_u"));
    l.scenario = block(j.at("x_s"));
    return l;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed layout: ") + e.what());
  }
}

void write_samples(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& s : samples) out << sample_to_json(s).dump() << '\n';
}

std::vector<Sample> read_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(sample_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::filesystem::path layout_path(const std::filesystem::path& dataset) {
  return std::filesystem::path(dataset.string() + ".layout.json");
}

std::filesystem::path stats_path(const std::filesystem::path& dataset) {
  return std::filesystem::path(dataset.string() + ".stats.txt");
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  write_samples(path, ds.samples);
  std::ofstream lo(layout_path(path), std::ios::binary);
  lo << layout_to_json(ds.layout).dump(2) << '\n';
  std::ofstream st(stats_path(path), std::ios::binary);
  st << dataset_stats(ds.samples, ds.discarded).to_text();
}

FeatureLayout read_layout(const std::filesystem::path& dataset) {
  std::ifstream in(layout_path(dataset));
  if (!in) return FeatureLayout::standard();
  try {
    return layout_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed layout file: ") + e.what());
  }
}

std::vector<Sample> select_split(const std::vector<Sample>& samples, const std::string& split) {
  if (split != "all" && split != "train" && split != "test") {
    throw std::invalid_argument("unknown split '" + split + "' (expected train, test or all)");
  }
  std::vector<Sample> out;
  for (const auto& s : samples)
    if (split == "all" || s.split == split) out.push_back(s);
  return out;
}

}  // namespace ccn
