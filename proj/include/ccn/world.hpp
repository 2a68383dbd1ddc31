#ifndef CCN_WORLD_HPP
#define CCN_WORLD_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccn::world {

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoRouteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Scenario

enum class TimeBand { Peak = 0, Offpeak = 1, Night = 2 };
enum class Vehicle { Car = 0, Truck = 1 };
enum class DayKind { Weekday = 0, Weekend = 1 };

struct Scenario {
  TimeBand time_band = TimeBand::Offpeak;
  Vehicle vehicle = Vehicle::Car;
  DayKind day = DayKind::Weekday;

  static constexpr int kWidth = 7;
  std::vector<double> one_hot() const;
  static std::vector<std::string> column_names();
};

// ---------------------------------------------------------------------------
// Road graph

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Edge {
  int id = 0;
  int from = 0;
  int to = 0;
  double length_m = 0.0;
  double base_speed_kmh = 0.0;
  bool toll = false;
  bool traffic_light = false;
  int road_class = 2;  // 0 arterial, 1 main, 2 local
  double heat = 0.0;   // popularity in [0,1]
  std::array<double, 3> congestion{1.0, 1.0, 1.0};  // indexed by TimeBand, each >= 1
};

struct RoadGraph {
  std::vector<Point> nodes;
  std::vector<Edge> edges;                  // edges[k].id == k
  std::vector<std::vector<int>> out_edges;  // node -> edge ids, ascending

  int node_count() const { return static_cast<int>(nodes.size()); }
  const Edge& edge(int id) const { return edges.at(static_cast<std::size_t>(id)); }
  void rebuild_adjacency();
};

struct GraphConfig {
  int grid_width = 10;
  int grid_height = 10;
  double spacing_m = 500.0;
  double jitter = 0.2;         // fraction of spacing
  double diagonal_prob = 0.15;  // per grid cell
  double closure_prob = 0.05;   // per grid link
  int arterial_every = 3;
  double toll_prob = 0.35;  // per arterial link
  double light_prob = 0.35;
  int max_retries = 20;
};

/// Grid with random diagonals and closures. Same seed, same graph.
RoadGraph generate_graph(const GraphConfig& cfg, std::uint64_t seed);

/// True when every node reaches every other node.
bool strongly_connected(const RoadGraph& g);

/// Congestion multiplier of an edge under a scenario (weekends halve the
/// excess over free flow).
double congestion_factor(const Edge& e, const Scenario& sc);
/// Congested travel time in seconds.
double edge_eta_s(const Edge& e, const Scenario& sc);

// ---------------------------------------------------------------------------
// Routes

/// Ordered edge ids; consecutive edges share a node.
struct Route {
  std::vector<int> edge_ids;
  bool operator==(const Route&) const = default;
};

/// The traveled edge sequence of a simulated user.
using Trace = Route;

struct RouteStats {
  double length_m = 0.0;
  double freeflow_eta_s = 0.0;
  double eta_s = 0.0;
  int tolls = 0;
  int lights = 0;
  int turns = 0;
  double mean_heat = 0.0;  // length weighted
  std::array<double, 3> class_share{0.0, 0.0, 0.0};
};

/// Heading change above which consecutive edges count as a turn.
inline constexpr double kTurnThresholdDeg = 40.0;

bool is_turn(const RoadGraph& g, int prev_edge, int next_edge);

/// Aggregates over a subset of a route's edges. `route` supplies turn
/// context: a turn is counted at each selected edge whose predecessor in
/// `route` differs in heading.
RouteStats segment_stats(const RoadGraph& g, const Route& route, std::span<const int> subset,
                         const Scenario& sc);
RouteStats route_stats(const RoadGraph& g, const Route& route, const Scenario& sc);

bool is_contiguous(const RoadGraph& g, const Route& r);
bool has_repeated_edge(const Route& r);
double route_length(const RoadGraph& g, const Route& r);

using EdgeCost = std::function<double(const Edge&)>;

/// Dijkstra. Equal-cost ties resolve to the smaller predecessor edge id.
/// Throws NoRouteError when `d` is unreachable.
Route shortest_path(const RoadGraph& g, const EdgeCost& cost, int origin, int destination);

// ---------------------------------------------------------------------------
// Recall

struct RecallConfig {
  double w_eta = 0.5;
  double w_length = 0.2;
  double w_toll = 0.1;
  double w_class = 0.1;
  double w_heat = 0.1;
  double penalty_factor = 1.4;
  int rounds_per_route = 6;
};

struct RecallResult {
  std::vector<Route> routes;         // sorted by recall score, best first
  std::vector<double> recall_score;  // negated blended cost
};

/// Blended multi-criteria edge cost used by recall.
double recall_edge_cost(const RoadGraph& g, const Edge& e, const Scenario& sc, const RecallConfig& cfg);

/// Penalty-based alternatives: repeated shortest paths where edges already
/// used get their cost multiplied by `penalty_factor` each round. Returns
/// std::nullopt (discard) when fewer than two distinct routes exist.
std::optional<RecallResult> recall_alternatives(const RoadGraph& g, const Scenario& sc, int origin,
                                                int destination, int n_routes,
                                                const RecallConfig& cfg = {});

// ---------------------------------------------------------------------------
// Users and choices

inline constexpr int kFieldCount = 5;
enum class Field { Time = 0, Distance = 1, Toll = 2, Comfort = 3, Familiarity = 4 };
const std::array<std::string, kFieldCount>& field_names();

struct UserProfile {
  std::array<double, kFieldCount> weights{};  // sums to 1
  double detour_aversion = 0.0;
  double noise_temperature = 1.0;
  // Visible attributes, deterministic given latents and seed.
  int age_bucket = 0;  // 0 young, 1 middle, 2 senior
  double driving_frequency = 0.0;
  double commute_share = 0.0;
  double premium = 0.0;

  static constexpr int kVisibleWidth = 6;
  std::vector<double> visible() const;
  static std::vector<std::string> visible_names();
};

struct UserConfig {
  double dirichlet_alpha = 0.7;
  double detour_aversion_min = 3.0;
  double detour_aversion_max = 10.0;
  double temperature_min = 0.15;
  double temperature_max = 0.35;
};

UserProfile sample_user(std::mt19937_64& rng, const UserConfig& cfg = {});

struct ChoiceConfig {
  double deviation_prob = 0.1;
  // Cost units per field: a difference of one unit costs w_m utility.
  std::array<double, kFieldCount> field_scale{3.0, 1.5, 1.0, 4.0, 0.15};
};

/// Raw per-field costs (time min, distance km, tolls, comfort, 1-heat).
std::array<double, kFieldCount> field_costs(const RoadGraph& g, const Route& r, const Scenario& sc);

/// Global utility minus the local-detour penalty: detour_aversion times the
/// worst log detour ratio of a route against any other candidate, weighted
/// by the share of the route the two have in common.
std::vector<double> route_utilities(const RoadGraph& g, const UserProfile& user, const Scenario& sc,
                                    std::span<const Route> routes, const ChoiceConfig& cfg = {});

struct Choice {
  int index = 0;
  Trace trace;
  bool deviated = false;
};

/// Softmax choice at the user's temperature; the trace may contain a short
/// excursion around one interior edge.
Choice simulate_choice(const RoadGraph& g, const UserProfile& user, const Scenario& sc,
                       std::span<const Route> routes, std::mt19937_64& rng,
                       const ChoiceConfig& cfg = {});

// ---------------------------------------------------------------------------
// Labels

/// Length-weighted Jaccard overlap of the two edge sets.
double coverage_rate(const Route& route, const Trace& trace, const RoadGraph& g);

struct Labels {
  std::vector<double> y_r;               // one-hot
  std::vector<std::vector<double>> y_e;  // y_e[i][j] = CR_i > CR_j
  int l = 0;
};

Labels make_labels(std::span<const double> crs);

/// Per-purpose RNG derived from (seed, stream, index).
std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace ccn::world

#endif  // CCN_WORLD_HPP
