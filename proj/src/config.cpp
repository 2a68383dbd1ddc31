#include "ccn/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace ccn {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T convert(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if constexpr (std::is_same_v<T, bool>) {
    std::string l = v;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
    if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
    if (l == "false" || l == "0" || l == "no" || l == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
  } else {
    std::istringstream is(v);
    T out{};
    is >> out;
    if (!is || !is.eof()) throw ConfigError(key + ": cannot parse '" + v + "'");
    return out;
  }
}

// Binds keys of one section to destinations; unknown keys are errors.
class Section {
 public:
  Section(const pt::ptree& tree, std::string name) : name_(std::move(name)) {
    if (auto child = tree.get_child_optional(name_)) {
      for (const auto& [k, v] : *child) values_[k] = v.get_value<std::string>();
    }
  }
  template <typename T>
  Section& bind(const std::string& key, T& dst) {
    known_.insert(key);
    if (auto it = values_.find(key); it != values_.end()) dst = convert<T>(name_ + "." + key, it->second);
    return *this;
  }
  template <typename T, std::size_t N>
  Section& bind(const std::string& key, std::array<T, N>& dst) {
    known_.insert(key);
    if (auto it = values_.find(key); it != values_.end()) {
      const auto items = split_list(it->second);
      if (items.size() != N) {
        throw ConfigError(name_ + "." + key + ": expected " + std::to_string(N) + " values");
      }
      for (std::size_t k = 0; k < N; ++k) dst[k] = convert<T>(name_ + "." + key, items[k]);
    }
    return *this;
  }
  template <typename T>
  Section& bind(const std::string& key, std::vector<T>& dst) {
    known_.insert(key);
    if (auto it = values_.find(key); it != values_.end()) {
      dst.clear();
      for (const auto& item : split_list(it->second)) dst.push_back(convert<T>(name_ + "." + key, item));
    }
    return *this;
  }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void finish() const {
    for (const auto& [k, v] : values_) {
      if (!known_.count(k)) throw ConfigError("unknown key '" + k + "' in [" + name_ + "]");
    }
  }

 private:
  std::string name_;
  std::map<std::string, std::string> values_;
  std::set<std::string> known_;
};

}  // namespace

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  static const std::set<std::string> sections{"graph", "recall", "users", "choice", "dataset",
                                              "model", "train",  "ablation", "features"};
  for (const auto& [name, child] : tree) {
    if (!sections.count(name)) throw ConfigError("unknown config section [" + name + "]");
  }

  RunConfig rc;
  auto& g = rc.dataset.graph;
  Section(tree, "graph")
      .bind("grid_width", g.grid_width)
      .bind("grid_height", g.grid_height)
      .bind("spacing_m", g.spacing_m)
      .bind("jitter", g.jitter)
      .bind("diagonal_prob", g.diagonal_prob)
      .bind("closure_prob", g.closure_prob)
      .bind("arterial_every", g.arterial_every)
      .bind("toll_prob", g.toll_prob)
      .bind("light_prob", g.light_prob)
      .bind("max_retries", g.max_retries)
      .finish();
  auto& r = rc.dataset.recall;
  Section(tree, "recall")
      .bind("w_eta", r.w_eta)
      .bind("w_length", r.w_length)
      .bind("w_toll", r.w_toll)
      .bind("w_class", r.w_class)
      .bind("w_heat", r.w_heat)
      .bind("penalty_factor", r.penalty_factor)
      .bind("rounds_per_route", r.rounds_per_route)
      .finish();
  auto& u = rc.dataset.users;
  Section(tree, "users")
      .bind("dirichlet_alpha", u.dirichlet_alpha)
      .bind("detour_aversion_min", u.detour_aversion_min)
      .bind("detour_aversion_max", u.detour_aversion_max)
      .bind("temperature_min", u.temperature_min)
      .bind("temperature_max", u.temperature_max)
      .finish();
  auto& c = rc.dataset.choice;
  Section(tree, "choice").bind("deviation_prob", c.deviation_prob).bind("field_scale", c.field_scale).finish();
  auto& d = rc.dataset;
  Section(tree, "dataset")
      .bind("n_samples", d.n_samples)
      .bind("n_routes", d.n_routes)
      .bind("test_fraction", d.test_fraction)
      .bind("n_users", d.n_users)
      .bind("history_len", d.history_len)
      .bind("min_trip_m", d.min_trip_m)
      .bind("max_od_attempts", d.max_od_attempts)
      .finish();
  auto& m = rc.model;
  Section(tree, "model")
      .bind("k_blocks", m.k_blocks)
      .bind("banks", m.banks)
      .bind("widths", m.widths)
      .bind("lambda", m.lambda)
      .bind("use_xc", m.use_xc)
      .bind("use_cco", m.use_cco)
      .bind("use_ps", m.use_ps)
      .bind("distill", m.distill)
      .finish();
  auto& t = rc.train;
  Section(tree, "train")
      .bind("lr", t.lr)
      .bind("batch_size", t.batch_size)
      .bind("epochs", t.epochs)
      .bind("seed", t.seed)
      .bind("clip_norm", t.clip_norm)
      .bind("eval_every", t.eval_every)
      .bind("verbose", t.verbose)
      .finish();
  Section(tree, "ablation").bind("seeds", rc.seeds).finish();
  Section features(tree, "features");
  features.bind("route_width", m.route_width)
      .bind("pair_width", m.pair_width)
      .bind("user_width", m.user_width)
      .bind("scenario_width", m.scenario_width)
      .bind("fields", rc.fields)
      .finish();
  rc.has_feature_override = tree.get_child_optional("features").has_value();
  m.n_routes = d.n_routes;

  if (d.n_samples < 1 || d.n_routes < 2 || d.n_users < 1 || d.history_len < 0 || !(d.test_fraction >= 0.0) ||
      d.test_fraction >= 1.0) {
    throw ConfigError("[dataset]: need n_samples >= 1, n_routes >= 2, n_users >= 1, 0 <= test_fraction < 1");
  }
  if (t.batch_size < 1 || t.epochs < 0 || !(t.lr > 0.0) || !(t.clip_norm > 0.0)) {
    throw ConfigError("[train]: need batch_size >= 1, epochs >= 0, lr > 0, clip_norm > 0");
  }
  if (rc.seeds.empty()) throw ConfigError("[ablation]: seeds must not be empty");
  return rc;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ModelConfig model_for_layout(const RunConfig& rc, const FeatureLayout& layout) {
  ModelConfig m = ModelConfig::for_layout(layout, rc.model.n_routes);
  m.k_blocks = rc.model.k_blocks;
  m.banks = rc.model.banks;
  m.widths = rc.model.widths;
  m.lambda = rc.model.lambda;
  m.use_xc = rc.model.use_xc;
  m.use_cco = rc.model.use_cco;
  m.use_ps = rc.model.use_ps;
  m.distill = rc.model.distill;
  return m;
}

ModelConfig model_from_features(const RunConfig& rc) {
  ModelConfig m = rc.model;
  try {
    m.fields = FieldPartition::round_robin(m.route_width, m.pair_width, rc.fields);
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return m;
}

}  // namespace ccn
