#include "ccn/model.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace ccn {

Variant ModelConfig::variant() const {
  if (use_cco) return Variant::Ccn;
  return use_xc ? Variant::SelfAttention : Variant::Pointwise;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (n_routes < 2) fail("n_routes must be at least 2");
  if (k_blocks < 1) fail("K must be at least 1");
  if (banks < 1) fail("S must be at least 1");
  for (int w : widths)
    if (w < 1) fail("widths must be positive");
  if (widths[3] != 1) fail("h4 must be 1 for scoring heads");
  if (!(lambda >= 0.0)) fail("lambda must be non-negative");
  if (distill && !use_ps) fail("distill requires use_ps");
  if (use_ps && !use_cco) fail("use_ps requires use_cco");
  if (route_width < 1 || pair_width < 1 || user_width < 1 || scenario_width < 1) fail("input widths must be positive");
  if (use_ps) {
    if (fields.size() < 1) fail("use_ps needs a field partition");
    fields.validate(route_width, pair_width);
  }
}

std::string ModelConfig::name() const {
  switch (variant()) {
    case Variant::Pointwise:
      return "pointwise";
    case Variant::SelfAttention:
      return "self_attention";
    case Variant::Ccn:
      break;
  }
  std::string n = use_xc ? "ccn" : "ccn_no_xc";
  if (!use_ps) return n + "_unconstrained";
  return distill ? n : n + "_plain_ps";
}

ModelConfig ModelConfig::for_layout(const FeatureLayout& layout, int n_routes) {
  ModelConfig c;
  c.n_routes = n_routes;
  c.route_width = static_cast<Index>(layout.route.size());
  c.pair_width = static_cast<Index>(layout.pair.size());
  c.user_width = static_cast<Index>(layout.user.size());
  c.scenario_width = static_cast<Index>(layout.scenario.size());
  c.fields = FieldPartition::from_layout(layout);
  return c;
}

std::vector<Index> canonical_order(const Sample& s) {
  std::vector<Index> ord(static_cast<std::size_t>(s.n_routes()));
  std::iota(ord.begin(), ord.end(), Index{0});
  if (s.x_r.cols() <= kRecallScoreColumn) return ord;  // synthetic layouts carry no recall score
  std::stable_sort(ord.begin(), ord.end(), [&s](Index a, Index b) {
    return s.x_r(a, kRecallScoreColumn) > s.x_r(b, kRecallScoreColumn);
  });
  return ord;
}

FeatureMatrix pair_mask(Index n, int l) {
  if (l < 0 || l >= n) throw std::out_of_range("pair_mask: l out of range");
  FeatureMatrix m = FeatureMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = ((i == l || j == l) && i != j) ? 1.0 : 0.0;
  return m;
}

long long approx_param_count(int k, int s, long long f, const std::array<int, 4>& h) {
  const long long per = f * h[0] + static_cast<long long>(h[0]) * h[1] + static_cast<long long>(h[1]) * h[2] +
                        static_cast<long long>(h[2]) * h[3];
  return static_cast<long long>(k) * s * per;
}

ParamCount param_count(const ModelConfig& cfg) {
  ParamCount pc;
  CcnModel<float> model(cfg, 0);
  pc.exact = model.params().trainable_count();
  pc.approx = approx_param_count(cfg.k_blocks, cfg.banks, cfg.comparison_layout().width(), cfg.widths);
  pc.ratio = pc.approx > 0 ? static_cast<double>(pc.exact) / static_cast<double>(pc.approx) : 0.0;
  pc.approx_f32_bytes = 4.0 * static_cast<double>(pc.approx);
  pc.exact_f32_bytes = 4.0 * static_cast<double>(pc.exact);
  return pc;
}

}  // namespace ccn
