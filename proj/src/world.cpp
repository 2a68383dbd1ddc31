#include "ccn/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <set>
#include <unordered_set>

namespace ccn::world {

// ---------------------------------------------------------------------------
// Scenario

std::vector<double> Scenario::one_hot() const {
  std::vector<double> v(kWidth, 0.0);
  v[static_cast<int>(time_band)] = 1.0;
  v[3 + static_cast<int>(vehicle)] = 1.0;
  v[5 + static_cast<int>(day)] = 1.0;
  return v;
}

std::vector<std::string> Scenario::column_names() {
  return {"peak", "offpeak", "night", "car", "truck", "weekday", "weekend"};
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

// ---------------------------------------------------------------------------
// Graph

void RoadGraph::rebuild_adjacency() {
  out_edges.assign(nodes.size(), {});
  for (const auto& e : edges) out_edges[static_cast<std::size_t>(e.from)].push_back(e.id);
  for (auto& v : out_edges) std::sort(v.begin(), v.end());
}

bool strongly_connected(const RoadGraph& g) {
  const int n = g.node_count();
  if (n == 0) return false;
  auto reach_all = [&](bool reverse) {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const auto& e : g.edges) {
      if (reverse)
        adj[static_cast<std::size_t>(e.to)].push_back(e.from);
      else
        adj[static_cast<std::size_t>(e.from)].push_back(e.to);
    }
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : adj[static_cast<std::size_t>(u)]) {
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  };
  return reach_all(false) && reach_all(true);
}

namespace {

struct Link {
  int a, b;
  int road_class;
};

RoadGraph build_once(const GraphConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int w = cfg.grid_width, h = cfg.grid_height;
  RoadGraph g;
  g.nodes.reserve(static_cast<std::size_t>(w * h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double jx = (unit(rng) * 2.0 - 1.0) * cfg.jitter * cfg.spacing_m;
      const double jy = (unit(rng) * 2.0 - 1.0) * cfg.jitter * cfg.spacing_m;
      g.nodes.push_back({x * cfg.spacing_m + jx, y * cfg.spacing_m + jy});
    }
  }
  auto id = [w](int x, int y) { return y * w + x; };
  auto line_class = [&](int line) {
    if (cfg.arterial_every > 0 && line % cfg.arterial_every == 0) return 0;
    return line % 2 == 0 ? 1 : 2;
  };

  std::vector<Link> links;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w && unit(rng) >= cfg.closure_prob) links.push_back({id(x, y), id(x + 1, y), line_class(y)});
      if (y + 1 < h && unit(rng) >= cfg.closure_prob) links.push_back({id(x, y), id(x, y + 1), line_class(x)});
      if (x + 1 < w && y + 1 < h && unit(rng) < cfg.diagonal_prob) {
        if (unit(rng) < 0.5)
          links.push_back({id(x, y), id(x + 1, y + 1), 2});
        else
          links.push_back({id(x + 1, y), id(x, y + 1), 2});
      }
    }
  }

  static constexpr std::array<double, 3> kSpeed{70.0, 50.0, 30.0};
  static constexpr std::array<double, 3> kHeat{0.7, 0.5, 0.25};
  static constexpr std::array<double, 3> kPeakExcess{1.0, 0.6, 0.15};
  for (const auto& link : links) {
    const auto& pa = g.nodes[static_cast<std::size_t>(link.a)];
    const auto& pb = g.nodes[static_cast<std::size_t>(link.b)];
    const double straight = std::hypot(pa.x - pb.x, pa.y - pb.y);
    const int c = link.road_class;
    Edge proto;
    proto.road_class = c;
    proto.length_m = std::max(1.0, straight * (1.0 + 0.08 * unit(rng)));
    proto.base_speed_kmh = kSpeed[c] * (0.9 + 0.2 * unit(rng));
    proto.toll = c == 0 && unit(rng) < cfg.toll_prob;
    proto.traffic_light = unit(rng) < (c == 0 ? 0.5 * cfg.light_prob : cfg.light_prob);
    proto.heat = std::clamp(kHeat[c] + 0.3 * (unit(rng) - 0.5), 0.0, 1.0);
    for (int dir = 0; dir < 2; ++dir) {
      Edge e = proto;
      e.id = static_cast<int>(g.edges.size());
      e.from = dir == 0 ? link.a : link.b;
      e.to = dir == 0 ? link.b : link.a;
      const double peak = 1.0 + kPeakExcess[c] * (0.5 + unit(rng));
      e.congestion = {peak, 1.0 + 0.35 * (peak - 1.0), 1.0};
      g.edges.push_back(e);
    }
  }
  g.rebuild_adjacency();
  return g;
}

}  // namespace

RoadGraph generate_graph(const GraphConfig& cfg, std::uint64_t seed) {
  if (cfg.grid_width * cfg.grid_height < 16 || cfg.grid_width < 2 || cfg.grid_height < 2) {
    throw std::invalid_argument("generate_graph: need at least 16 nodes on a 2D grid");
  }
  for (int attempt = 0; attempt < std::max(1, cfg.max_retries); ++attempt) {
    auto rng = derived_rng(seed, 0, static_cast<std::uint64_t>(attempt));
    RoadGraph g = build_once(cfg, rng);
    if (strongly_connected(g)) return g;
  }
  throw GenerationError("generate_graph: graph disconnected after " +
                        std::to_string(cfg.max_retries) + " attempts");
}

double congestion_factor(const Edge& e, const Scenario& sc) {
  const double c = e.congestion[static_cast<std::size_t>(sc.time_band)];
  return sc.day == DayKind::Weekend ? 1.0 + 0.5 * (c - 1.0) : c;
}

double edge_eta_s(const Edge& e, const Scenario& sc) {
  const double speed_ms = e.base_speed_kmh / 3.6 / congestion_factor(e, sc);
  return e.length_m / speed_ms;
}

// ---------------------------------------------------------------------------
// Routes

bool is_turn(const RoadGraph& g, int prev_edge, int next_edge) {
  const auto& a = g.edge(prev_edge);
  const auto& b = g.edge(next_edge);
  const auto& a0 = g.nodes[static_cast<std::size_t>(a.from)];
  const auto& a1 = g.nodes[static_cast<std::size_t>(a.to)];
  const auto& b1 = g.nodes[static_cast<std::size_t>(b.to)];
  const double h1 = std::atan2(a1.y - a0.y, a1.x - a0.x);
  const double h2 = std::atan2(b1.y - a1.y, b1.x - a1.x);
  double d = std::abs(h2 - h1);
  if (d > std::numbers::pi) d = 2.0 * std::numbers::pi - d;
  return d * 180.0 / std::numbers::pi > kTurnThresholdDeg;
}

RouteStats segment_stats(const RoadGraph& g, const Route& route, std::span<const int> subset,
                         const Scenario& sc) {
  const std::unordered_set<int> keep(subset.begin(), subset.end());
  RouteStats s;
  double heat_len = 0.0;
  std::array<double, 3> class_len{0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < route.edge_ids.size(); ++k) {
    const int id = route.edge_ids[k];
    if (!keep.contains(id)) continue;
    const auto& e = g.edge(id);
    s.length_m += e.length_m;
    s.freeflow_eta_s += e.length_m / (e.base_speed_kmh / 3.6);
    s.eta_s += edge_eta_s(e, sc);
    s.tolls += e.toll ? 1 : 0;
    s.lights += e.traffic_light ? 1 : 0;
    if (k > 0 && is_turn(g, route.edge_ids[k - 1], id)) ++s.turns;
    heat_len += e.heat * e.length_m;
    class_len[static_cast<std::size_t>(e.road_class)] += e.length_m;
  }
  if (s.length_m > 0.0) {
    s.mean_heat = heat_len / s.length_m;
    for (int c = 0; c < 3; ++c) s.class_share[c] = class_len[c] / s.length_m;
  }
  return s;
}

RouteStats route_stats(const RoadGraph& g, const Route& route, const Scenario& sc) {
  return segment_stats(g, route, route.edge_ids, sc);
}

bool is_contiguous(const RoadGraph& g, const Route& r) {
  for (std::size_t k = 1; k < r.edge_ids.size(); ++k) {
    if (g.edge(r.edge_ids[k - 1]).to != g.edge(r.edge_ids[k]).from) return false;
  }
  return true;
}

bool has_repeated_edge(const Route& r) {
  std::unordered_set<int> seen;
  for (int id : r.edge_ids) {
    if (!seen.insert(id).second) return true;
  }
  return false;
}

double route_length(const RoadGraph& g, const Route& r) {
  double len = 0.0;
  for (int id : r.edge_ids) len += g.edge(id).length_m;
  return len;
}

Route shortest_path(const RoadGraph& g, const EdgeCost& cost, int origin, int destination) {
  const int n = g.node_count();
  if (origin < 0 || origin >= n || destination < 0 || destination >= n) {
    throw std::invalid_argument("shortest_path: node out of range");
  }
  if (origin == destination) throw std::invalid_argument("shortest_path: origin equals destination");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(n), kInf);
  std::vector<int> pred(static_cast<std::size_t>(n), -1);
  std::vector<char> done(static_cast<std::size_t>(n), 0);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[static_cast<std::size_t>(origin)] = 0.0;
  heap.emplace(0.0, origin);
  while (!heap.empty()) {
    const auto [du, u] = heap.top();
    heap.pop();
    if (done[static_cast<std::size_t>(u)]) continue;
    done[static_cast<std::size_t>(u)] = 1;
    if (u == destination) break;
    for (int id : g.out_edges[static_cast<std::size_t>(u)]) {
      const auto& e = g.edge(id);
      const double c = cost(e);
      if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("shortest_path: edge cost must be positive");
      const auto v = static_cast<std::size_t>(e.to);
      if (done[v]) continue;
      const double nd = du + c;
      if (nd < dist[v]) {
        dist[v] = nd;
        pred[v] = id;
        heap.emplace(nd, e.to);
      } else if (nd == dist[v] && id < pred[v]) {
        pred[v] = id;
      }
    }
  }
  if (!std::isfinite(dist[static_cast<std::size_t>(destination)])) {
    throw NoRouteError("shortest_path: node " + std::to_string(destination) + " unreachable from " +
                       std::to_string(origin));
  }
  Route r;
  for (int v = destination; v != origin;) {
    const int id = pred[static_cast<std::size_t>(v)];
    r.edge_ids.push_back(id);
    v = g.edge(id).from;
  }
  std::reverse(r.edge_ids.begin(), r.edge_ids.end());
  return r;
}

// ---------------------------------------------------------------------------
// Recall

namespace {

struct RecallRefs {
  double eta = 1.0;
  double length = 1.0;
};

RecallRefs recall_refs(const RoadGraph& g, const Scenario& sc) {
  RecallRefs r;
  if (g.edges.empty()) return r;
  double eta = 0.0, len = 0.0;
  for (const auto& e : g.edges) {
    eta += edge_eta_s(e, sc);
    len += e.length_m;
  }
  r.eta = eta / static_cast<double>(g.edges.size());
  r.length = len / static_cast<double>(g.edges.size());
  return r;
}

double blended_cost(const Edge& e, const Scenario& sc, const RecallConfig& cfg, const RecallRefs& refs) {
  return cfg.w_eta * edge_eta_s(e, sc) / refs.eta + cfg.w_length * e.length_m / refs.length +
         cfg.w_toll * (e.toll ? 1.0 : 0.0) + cfg.w_class * e.road_class / 2.0 +
         cfg.w_heat * (1.0 - e.heat);
}

}  // namespace

double recall_edge_cost(const RoadGraph& g, const Edge& e, const Scenario& sc, const RecallConfig& cfg) {
  return blended_cost(e, sc, cfg, recall_refs(g, sc));
}

std::optional<RecallResult> recall_alternatives(const RoadGraph& g, const Scenario& sc, int origin,
                                                int destination, int n_routes,
                                                const RecallConfig& cfg) {
  if (n_routes < 2) throw std::invalid_argument("recall_alternatives: n_routes must be >= 2");
  if (!(cfg.penalty_factor > 1.0)) throw std::invalid_argument("recall_alternatives: penalty_factor must be > 1");
  const RecallRefs refs = recall_refs(g, sc);
  std::vector<double> base(g.edges.size());
  for (const auto& e : g.edges) base[static_cast<std::size_t>(e.id)] = blended_cost(e, sc, cfg, refs);
  std::vector<double> mult(g.edges.size(), 1.0);

  std::vector<Route> found;
  std::set<std::vector<int>> signatures;
  const int max_rounds = std::max(1, cfg.rounds_per_route) * n_routes;
  for (int round = 0; round < max_rounds && static_cast<int>(found.size()) < n_routes; ++round) {
    Route r = shortest_path(
        g, [&](const Edge& e) { return base[static_cast<std::size_t>(e.id)] * mult[static_cast<std::size_t>(e.id)]; },
        origin, destination);
    std::vector<int> sig = r.edge_ids;
    std::sort(sig.begin(), sig.end());
    for (int id : r.edge_ids) mult[static_cast<std::size_t>(id)] *= cfg.penalty_factor;
    if (signatures.insert(std::move(sig)).second) found.push_back(std::move(r));
  }
  if (found.size() < 2) return std::nullopt;

  std::vector<double> score(found.size());
  for (std::size_t k = 0; k < found.size(); ++k) {
    double c = 0.0;
    for (int id : found[k].edge_ids) c += base[static_cast<std::size_t>(id)];
    score[k] = -c;
  }
  std::vector<std::size_t> order(found.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  RecallResult out;
  for (std::size_t k : order) {
    out.routes.push_back(found[k]);
    out.recall_score.push_back(score[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Users and choices

const std::array<std::string, kFieldCount>& field_names() {
  static const std::array<std::string, kFieldCount> names{"time", "distance", "toll", "comfort", "familiarity"};
  return names;
}

std::vector<double> UserProfile::visible() const {
  std::vector<double> v(kVisibleWidth, 0.0);
  v[static_cast<std::size_t>(age_bucket)] = 1.0;
  v[3] = driving_frequency;
  v[4] = commute_share;
  v[5] = premium;
  return v;
}

std::vector<std::string> UserProfile::visible_names() {
  return {"age_young", "age_middle", "age_senior", "driving_frequency", "commute_share", "premium"};
}

UserProfile sample_user(std::mt19937_64& rng, const UserConfig& cfg) {
  std::gamma_distribution<double> gamma(cfg.dirichlet_alpha, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  UserProfile u;
  double total = 0.0;
  for (auto& w : u.weights) total += (w = gamma(rng) + 1e-9);
  for (auto& w : u.weights) w /= total;
  u.detour_aversion = cfg.detour_aversion_min + (cfg.detour_aversion_max - cfg.detour_aversion_min) * unit(rng);
  u.noise_temperature = cfg.temperature_min + (cfg.temperature_max - cfg.temperature_min) * unit(rng);

  const auto w = [&](Field f) { return u.weights[static_cast<std::size_t>(f)]; };
  const double age_score = 2.0 * w(Field::Toll) + w(Field::Comfort) - w(Field::Time) + 0.15 * noise(rng);
  u.age_bucket = age_score < 0.1 ? 0 : (age_score < 0.4 ? 1 : 2);
  const double span = cfg.detour_aversion_max - cfg.detour_aversion_min;
  const double aversion01 = span > 0.0 ? (u.detour_aversion - cfg.detour_aversion_min) / span : 0.0;
  u.driving_frequency =
      std::clamp(1.5 * w(Field::Time) + 0.3 + 0.9 * aversion01 + 0.2 * noise(rng), 0.0, 3.0);
  u.commute_share = std::clamp(2.0 * w(Field::Familiarity) + 0.1 * noise(rng), 0.0, 1.0);
  const bool toll_tolerant = w(Field::Toll) < 0.12;
  u.premium = (unit(rng) < 0.1) != toll_tolerant ? 1.0 : 0.0;
  return u;
}

std::array<double, kFieldCount> field_costs(const RoadGraph& g, const Route& r, const Scenario& sc) {
  const RouteStats s = route_stats(g, r, sc);
  const double toll_weight = sc.vehicle == Vehicle::Truck ? 2.0 : 1.0;
  return {s.eta_s / 60.0, s.length_m / 1000.0, toll_weight * s.tolls,
          s.lights + 0.5 * s.turns + 5.0 * s.class_share[2], 1.0 - s.mean_heat};
}

namespace {

double exclusive_length(const RoadGraph& g, const Route& a, const Route& b) {
  const std::unordered_set<int> other(b.edge_ids.begin(), b.edge_ids.end());
  double len = 0.0;
  for (int id : a.edge_ids) {
    if (!other.contains(id)) len += g.edge(id).length_m;
  }
  return len;
}

}  // namespace

std::vector<double> route_utilities(const RoadGraph& g, const UserProfile& user, const Scenario& sc,
                                    std::span<const Route> routes, const ChoiceConfig& cfg) {
  const std::size_t n = routes.size();
  std::vector<std::array<double, kFieldCount>> costs(n);
  for (std::size_t i = 0; i < n; ++i) costs[i] = field_costs(g, routes[i], sc);
  std::array<double, kFieldCount> best;
  best.fill(std::numeric_limits<double>::infinity());
  for (const auto& c : costs)
    for (int m = 0; m < kFieldCount; ++m) best[m] = std::min(best[m], c[m]);

  std::vector<double> util(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int m = 0; m < kFieldCount; ++m) {
      util[i] -= user.weights[m] * (costs[i][m] - best[m]) / cfg.field_scale[m];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double len_i = std::max(1.0, route_length(g, routes[i]));
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double own = exclusive_length(g, routes[i], routes[j]);
      const double ratio = own / std::max(1.0, exclusive_length(g, routes[j], routes[i]));
      if (ratio > 1.0) worst = std::max(worst, (1.0 - own / len_i) * std::log(ratio));
    }
    util[i] -= user.detour_aversion * worst;
  }
  return util;
}

namespace {

// Replaces one interior edge u->v with a 2-3 edge path u->...->v that avoids
// every edge and node already on the route.
bool add_excursion(const RoadGraph& g, Trace& trace, std::mt19937_64& rng) {
  const std::size_t len = trace.edge_ids.size();
  if (len < 3) return false;
  std::unordered_set<int> on_route(trace.edge_ids.begin(), trace.edge_ids.end());
  std::unordered_set<int> nodes;
  for (int id : trace.edge_ids) {
    nodes.insert(g.edge(id).from);
    nodes.insert(g.edge(id).to);
  }
  std::uniform_int_distribution<std::size_t> pick(1, len - 2);
  for (int attempt = 0; attempt < 6; ++attempt) {
    const std::size_t k = pick(rng);
    const auto& e = g.edge(trace.edge_ids[k]);
    std::vector<std::vector<int>> options;
    for (int a : g.out_edges[static_cast<std::size_t>(e.from)]) {
      const auto& ea = g.edge(a);
      if (on_route.contains(a) || nodes.contains(ea.to)) continue;
      for (int b : g.out_edges[static_cast<std::size_t>(ea.to)]) {
        const auto& eb = g.edge(b);
        if (on_route.contains(b)) continue;
        if (eb.to == e.to) {
          options.push_back({a, b});
          continue;
        }
        if (nodes.contains(eb.to) || eb.to == e.from) continue;
        for (int c : g.out_edges[static_cast<std::size_t>(eb.to)]) {
          if (!on_route.contains(c) && g.edge(c).to == e.to) options.push_back({a, b, c});
        }
      }
    }
    if (options.empty()) continue;
    std::uniform_int_distribution<std::size_t> choose(0, options.size() - 1);
    const auto& sub = options[choose(rng)];
    trace.edge_ids.erase(trace.edge_ids.begin() + static_cast<std::ptrdiff_t>(k));
    trace.edge_ids.insert(trace.edge_ids.begin() + static_cast<std::ptrdiff_t>(k), sub.begin(), sub.end());
    return true;
  }
  return false;
}

}  // namespace

Choice simulate_choice(const RoadGraph& g, const UserProfile& user, const Scenario& sc,
                       std::span<const Route> routes, std::mt19937_64& rng, const ChoiceConfig& cfg) {
  if (routes.size() < 2) throw std::invalid_argument("simulate_choice: need at least two routes");
  const std::vector<double> util = route_utilities(g, user, sc, routes, cfg);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Choice out;
  if (user.noise_temperature <= 1e-9) {
    out.index = static_cast<int>(std::max_element(util.begin(), util.end()) - util.begin());
  } else {
    const double mx = *std::max_element(util.begin(), util.end());
    std::vector<double> p(util.size());
    double z = 0.0;
    for (std::size_t i = 0; i < util.size(); ++i) z += (p[i] = std::exp((util[i] - mx) / user.noise_temperature));
    double r = unit(rng) * z;
    out.index = static_cast<int>(p.size()) - 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (r < p[i]) {
        out.index = static_cast<int>(i);
        break;
      }
      r -= p[i];
    }
  }
  out.trace = routes[static_cast<std::size_t>(out.index)];
  if (cfg.deviation_prob > 0.0 && unit(rng) < cfg.deviation_prob) {
    out.deviated = add_excursion(g, out.trace, rng);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labels

double coverage_rate(const Route& route, const Trace& trace, const RoadGraph& g) {
  if (route.edge_ids.empty() || trace.edge_ids.empty()) {
    throw std::invalid_argument("coverage_rate: empty route or trace");
  }
  const std::set<int> a(route.edge_ids.begin(), route.edge_ids.end());
  const std::set<int> b(trace.edge_ids.begin(), trace.edge_ids.end());
  double inter = 0.0, uni = 0.0;
  for (int id : a) {
    const double len = g.edge(id).length_m;
    uni += len;
    if (b.contains(id)) inter += len;
  }
  for (int id : b) {
    if (!a.contains(id)) uni += g.edge(id).length_m;
  }
  return inter / uni;
}

Labels make_labels(std::span<const double> crs) {
  if (crs.size() < 2) throw std::invalid_argument("make_labels: need at least two coverage rates");
  const std::size_t n = crs.size();
  Labels out;
  out.l = static_cast<int>(std::max_element(crs.begin(), crs.end()) - crs.begin());
  out.y_r.assign(n, 0.0);
  out.y_r[static_cast<std::size_t>(out.l)] = 1.0;
  out.y_e.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.y_e[i][j] = crs[i] > crs[j] ? 1.0 : 0.0;
  return out;
}

}  // namespace ccn::world
