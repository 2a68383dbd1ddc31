#ifndef CCN_MODEL_HPP
#define CCN_MODEL_HPP

#include "ccn/batch_norm.hpp"
#include "ccn/features.hpp"
#include "ccn/ops.hpp"
#include "ccn/tensor.hpp"
#include "ccn/world.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccn {

// ---------------------------------------------------------------------------
// Configuration

enum class Variant { Ccn, Pointwise, SelfAttention };

struct ModelConfig {
  int n_routes = 8;
  int k_blocks = 2;  // CCBs after the MCCB
  int banks = 4;     // S
  std::array<int, 4> widths{64, 32, 16, 1};
  double lambda = 0.1;
  bool use_xc = true;
  bool use_cco = true;
  bool use_ps = true;
  bool distill = true;

  // Input widths; filled from the dataset layout.
  Index route_width = 12;
  Index pair_width = 10;
  Index user_width = world::UserProfile::kVisibleWidth;
  Index scenario_width = world::Scenario::kWidth;
  FieldPartition fields;

  Variant variant() const;
  ComparisonLayout comparison_layout() const {
    return {route_width, route_width, pair_width, user_width};
  }
  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
  /// Short name used in ablation tables.
  std::string name() const;

  static ModelConfig for_layout(const FeatureLayout& layout, int n_routes);
  bool operator==(const ModelConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Parameters

/// Named tensors in creation order. Trainable parameters and buffers
/// (batch-norm statistics) live side by side so checkpoints see both.
template <typename Scalar>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<Scalar> tensor;
    bool trainable;
  };

  Tensor<Scalar> add(const std::string& name, Tensor<Scalar> t, bool trainable) {
    if (index_.count(name)) throw std::logic_error("duplicate parameter " + name);
    t.set_requires_grad(trainable);
    index_[name] = entries_.size();
    entries_.push_back({name, t, trainable});
    return t;
  }
  const std::vector<Entry>& entries() const { return entries_; }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  Tensor<Scalar> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return entries_[it->second].tensor;
  }
  std::vector<Tensor<Scalar>> trainable() const {
    std::vector<Tensor<Scalar>> out;
    for (const auto& e : entries_)
      if (e.trainable) out.push_back(e.tensor);
    return out;
  }
  long long trainable_count() const {
    long long n = 0;
    for (const auto& e : entries_)
      if (e.trainable) n += e.tensor.size();
    return n;
  }
  void zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

namespace detail {

template <typename Scalar>
Tensor<Scalar> uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<Scalar> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = static_cast<Scalar>(u(rng));
  return Tensor<Scalar>(std::move(shape), std::move(v));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// DSFNet

/// Scenario-conditioned MLP. Each layer holds a bank of S weight sets; a
/// softmax gate on x_s mixes them per sample. Hidden layers run
/// linear -> BN -> ReLU; in head mode the last layer is a plain (zero
/// initialized) mixed linear map.
template <typename Scalar>
class DSFNet {
 public:
  DSFNet() = default;
  DSFNet(ParamStore<Scalar>& store, const std::string& prefix, Index in, std::vector<int> widths, int banks,
         Index scenario_width, bool head, std::mt19937_64& rng)
      : head_(head) {
    if (widths.empty()) throw std::invalid_argument("DSFNet needs at least one layer");
    const double gate_bound = 1.0 / std::sqrt(static_cast<double>(scenario_width));
    gate_w_ = store.add(prefix + ".gate.w", detail::uniform_tensor<Scalar>({scenario_width, banks}, gate_bound, rng), true);
    gate_b_ = store.add(prefix + ".gate.b", Tensor<Scalar>::zeros({banks}), true);
    Index fan_in = in;
    for (std::size_t l = 0; l < widths.size(); ++l) {
      const Index out = widths[l];
      const bool last_head = head && l + 1 == widths.size();
      const std::string p = prefix + ".l" + std::to_string(l);
      Layer layer;
      if (last_head) {
        layer.w = store.add(p + ".w", Tensor<Scalar>::zeros({banks, fan_in * out}), true);
      } else {
        layer.w = store.add(p + ".w", detail::uniform_tensor<Scalar>({banks, fan_in * out},
                                                                     std::sqrt(6.0 / static_cast<double>(fan_in)), rng),
                            true);
      }
      layer.b = store.add(p + ".b", Tensor<Scalar>::zeros({banks, out}), true);
      layer.has_bn = !last_head;
      if (layer.has_bn) {
        layer.gamma = store.add(p + ".bn.gamma", Tensor<Scalar>::ones({out}), true);
        layer.beta = store.add(p + ".bn.beta", Tensor<Scalar>::zeros({out}), true);
        layer.bn = BatchNormState<Scalar>::fresh(out);
        store.add(p + ".bn.mean", layer.bn.running_mean, false);
        store.add(p + ".bn.var", layer.bn.running_var, false);
        store.add(p + ".bn.steps", layer.bn.steps, false);
      }
      layers_.push_back(std::move(layer));
      fan_in = out;
    }
  }

  /// Mixing weights [B, S]; rows sum to one.
  Tensor<Scalar> gate(const Tensor<Scalar>& x_s) const { return softmax_last(linear(x_s, gate_w_, gate_b_)); }

  /// x [B, ..., in] -> [B, ..., width of last layer]
  Tensor<Scalar> forward(const Tensor<Scalar>& x, const Tensor<Scalar>& x_s, Mode mode) {
    const auto g = gate(x_s);
    Tensor<Scalar> h = x;
    for (auto& layer : layers_) {
      h = mixture_linear(h, g, layer.w, layer.b);
      if (layer.has_bn) h = relu(batch_norm(h, layer.gamma, layer.beta, layer.bn, mode));
    }
    return h;
  }

  int layer_count() const { return static_cast<int>(layers_.size()); }
  bool head() const { return head_; }

 private:
  struct Layer {
    Tensor<Scalar> w, b, gamma, beta;
    BatchNormState<Scalar> bn;
    bool has_bn = true;
  };
  Tensor<Scalar> gate_w_, gate_b_;
  std::vector<Layer> layers_;
  bool head_ = false;
};

// ---------------------------------------------------------------------------
// Batches

/// Samples stacked along a leading axis. Candidates are reordered by
/// descending recall score (the canonical order) unless disabled;
/// order[b][k] is the original index of canonical position k.
template <typename Scalar>
struct Batch {
  Index size = 0;
  Index n = 0;
  Tensor<Scalar> x_r;  // [B, N, F_r]
  Tensor<Scalar> x_h;  // [B, N, F_r]
  Tensor<Scalar> x_c;  // [B, N, N, F_c]
  Tensor<Scalar> x_u;  // [B, F_u]
  Tensor<Scalar> x_s;  // [B, F_s]
  Tensor<Scalar> y_r;  // [B, N]
  Tensor<Scalar> y_e;  // [B, N, N]
  Tensor<Scalar> mask;  // [B, N, N]
  std::vector<int> l;  // canonical index of the label route
  std::vector<std::vector<Index>> order;
  std::vector<std::string> ids;
};

/// Candidate order by descending recall score, ties by original index.
std::vector<Index> canonical_order(const Sample& s);

/// mask[i][j] = (i == l || j == l) && i != j
FeatureMatrix pair_mask(Index n, int l);

/// Stacks (already normalized) samples. Every sample must have the same N.
template <typename Scalar>
Batch<Scalar> make_batch(std::span<const Sample* const> samples, bool canonical = true) {
  if (samples.empty()) throw std::invalid_argument("make_batch: empty batch");
  Batch<Scalar> b;
  b.size = static_cast<Index>(samples.size());
  b.n = samples[0]->n_routes();
  const Index n = b.n, fr = samples[0]->x_r.cols(), fc = samples[0]->x_c.width;
  const Index fu = samples[0]->x_u.size(), fs = samples[0]->x_s.size();
  std::vector<Scalar> xr, xh, xc, xu, xs, yr, ye, mk;
  xr.reserve(static_cast<std::size_t>(b.size * n * fr));
  xh.reserve(xr.capacity());
  xc.reserve(static_cast<std::size_t>(b.size * n * n * fc));
  for (const Sample* sp : samples) {
    const Sample& s = *sp;
    if (s.n_routes() != n || s.x_r.cols() != fr || s.x_c.width != fc || s.x_u.size() != fu || s.x_s.size() != fs) {
      throw DimensionError("make_batch: sample " + s.sample_id + " does not match the batch shape");
    }
    std::vector<Index> ord(static_cast<std::size_t>(n));
    if (canonical) {
      ord = canonical_order(s);
    } else {
      for (Index k = 0; k < n; ++k) ord[static_cast<std::size_t>(k)] = k;
    }
    std::vector<Index> pos(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) pos[static_cast<std::size_t>(ord[static_cast<std::size_t>(k)])] = k;
    const FeatureMatrix hist = history_representation(history_matrix(s), s.x_r);
    for (Index k = 0; k < n; ++k) {
      const Index i = ord[static_cast<std::size_t>(k)];
      for (Index c = 0; c < fr; ++c) xr.push_back(static_cast<Scalar>(s.x_r(i, c)));
      for (Index c = 0; c < fr; ++c) xh.push_back(static_cast<Scalar>(hist(i, c)));
      yr.push_back(static_cast<Scalar>(s.y_r[static_cast<std::size_t>(i)]));
    }
    for (Index k = 0; k < n; ++k) {
      const Index i = ord[static_cast<std::size_t>(k)];
      for (Index t = 0; t < n; ++t) {
        const Index j = ord[static_cast<std::size_t>(t)];
        for (Index c = 0; c < fc; ++c) xc.push_back(static_cast<Scalar>(s.x_c(i, j, c)));
        ye.push_back(static_cast<Scalar>(s.y_e(i, j)));
      }
    }
    const int l = static_cast<int>(pos[static_cast<std::size_t>(s.l)]);
    const FeatureMatrix m = pair_mask(n, l);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) mk.push_back(static_cast<Scalar>(m(i, j)));
    for (Index c = 0; c < fu; ++c) xu.push_back(static_cast<Scalar>(s.x_u[c]));
    for (Index c = 0; c < fs; ++c) xs.push_back(static_cast<Scalar>(s.x_s[c]));
    b.l.push_back(l);
    b.order.push_back(std::move(ord));
    b.ids.push_back(s.sample_id);
  }
  const Index bs = b.size;
  b.x_r = Tensor<Scalar>({bs, n, fr}, std::move(xr));
  b.x_h = Tensor<Scalar>({bs, n, fr}, std::move(xh));
  b.x_c = Tensor<Scalar>({bs, n, n, fc}, std::move(xc));
  b.x_u = Tensor<Scalar>({bs, fu}, std::move(xu));
  b.x_s = Tensor<Scalar>({bs, fs}, std::move(xs));
  b.y_r = Tensor<Scalar>({bs, n}, std::move(yr));
  b.y_e = Tensor<Scalar>({bs, n, n}, std::move(ye));
  b.mask = Tensor<Scalar>({bs, n, n}, std::move(mk));
  return b;
}

template <typename Scalar>
Batch<Scalar> make_batch(const Sample& s, bool canonical = true) {
  const Sample* p = &s;
  return make_batch<Scalar>(std::span<const Sample* const>(&p, 1), canonical);
}

// ---------------------------------------------------------------------------
// Forward

/// Intermediate tensors of one forward pass, in canonical candidate order.
/// PS-only entries are empty handles when the model has no PS.
template <typename Scalar>
struct ForwardArtifacts {
  Tensor<Scalar> c_e;           // [B, N, N, W]
  Tensor<Scalar> field_scores;  // S^E [B, N, N, M]
  Tensor<Scalar> pooled;        // sum of S^E over fields [B, N, N]
  Tensor<Scalar> p_e;           // [B, N, N]
  Tensor<Scalar> teacher_logit;  // D-hat - D-hat^T [B, N, N]
  Tensor<Scalar> p_hat;         // [B, N, N]
  std::vector<Tensor<Scalar>> blocks;  // O^1..O^K
  Tensor<Scalar> attention;     // [B, N, N], self-attention baseline only
  Tensor<Scalar> p_r;           // [B, N]
};

/// C = Concat(Tile(X), Tile(X)^T) for x [B, N, F] -> [B, N, N, 2F].
template <typename Scalar>
Tensor<Scalar> cco(const Tensor<Scalar>& x) {
  if (x.rank() != 3) throw DimensionError("cco: expected [B, N, F], got " + to_string(x.shape()));
  const auto tiled = repeat_inner(x, x.dim(1));
  return concat_last({tiled, pair_transpose(tiled, 1)});
}

/// Pair-indexed CCO for x [B, N, N, F]: C[i][j] = concat(x[i][j], x[j][i]).
template <typename Scalar>
Tensor<Scalar> cco_pairs(const Tensor<Scalar>& x) {
  return concat_last({x, pair_transpose(x, 1)});
}

template <typename Scalar>
class CcnModel {
 public:
  CcnModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    auto rng = world::derived_rng(seed, 100, 0);
    const auto& w = cfg_.widths;
    const std::vector<int> body{w[0], w[1], w[2]};
    const std::vector<int> full{w[0], w[1], w[2], w[3]};
    const Index n = cfg_.n_routes, fs = cfg_.scenario_width, fr = cfg_.route_width;
    const int s = cfg_.banks;
    switch (cfg_.variant()) {
      case Variant::Pointwise:
        pointwise_ = DSFNet<Scalar>(store_, "pointwise", 2 * fr + cfg_.user_width, full, s, fs, true, rng);
        break;
      case Variant::SelfAttention: {
        const Index in = sa_row_width();
        const Index d = w[0];
        const double bound = std::sqrt(6.0 / static_cast<double>(in + d));
        wq_ = store_.add("sa.q", detail::uniform_tensor<Scalar>({in, d}, bound, rng), true);
        wk_ = store_.add("sa.k", detail::uniform_tensor<Scalar>({in, d}, bound, rng), true);
        wv_ = store_.add("sa.v", detail::uniform_tensor<Scalar>({in, d}, bound, rng), true);
        pointwise_ = DSFNet<Scalar>(store_, "sa.head", in + d, full, s, fs, true, rng);
        break;
      }
      case Variant::Ccn: {
        const auto layout = cfg_.comparison_layout();
        if (cfg_.use_ps) {
          field_columns_ = layout.field_columns(cfg_.fields);
          for (int m = 0; m < cfg_.fields.size(); ++m) {
            fields_.emplace_back(store_, "mccb.field." + cfg_.fields.names[static_cast<std::size_t>(m)],
                                 static_cast<Index>(field_columns_[static_cast<std::size_t>(m)].size()), body, s, fs,
                                 false, rng);
          }
          linear_ = DSFNet<Scalar>(store_, "mccb.linear", w[2], {w[3]}, s, fs, true, rng);
          if (cfg_.distill) teacher_ = DSFNet<Scalar>(store_, "mccb.teacher", layout.width(), full, s, fs, true, rng);
        } else {
          mccb_ = DSFNet<Scalar>(store_, "mccb.body", layout.width(), body, s, fs, false, rng);
        }
        Index width = cfg_.use_ps ? 1 : w[2];
        for (int k = 0; k < cfg_.k_blocks; ++k) {
          blocks_.emplace_back(store_, "ccb" + std::to_string(k + 1), 2 * n * width, body, s, fs, false, rng);
          width = w[2];
        }
        head_w_ = store_.add("head.w", Tensor<Scalar>::zeros({width, 1}), true);
        head_b_ = store_.add("head.b", Tensor<Scalar>::zeros({1}), true);
        break;
      }
    }
  }

  CcnModel(const CcnModel&) = delete;
  CcnModel& operator=(const CcnModel&) = delete;
  CcnModel(CcnModel&&) noexcept = default;
  CcnModel& operator=(CcnModel&&) noexcept = default;

  const ModelConfig& config() const { return cfg_; }
  ParamStore<Scalar>& params() { return store_; }
  const ParamStore<Scalar>& params() const { return store_; }

  ForwardArtifacts<Scalar> forward(const Batch<Scalar>& b, Mode mode) {
    if (b.n != cfg_.n_routes) {
      throw DimensionError("model expects N = " + std::to_string(cfg_.n_routes) + ", batch has " +
                           std::to_string(b.n));
    }
    switch (cfg_.variant()) {
      case Variant::Pointwise:
        return forward_pointwise(b, mode);
      case Variant::SelfAttention:
        return forward_attention(b, mode);
      case Variant::Ccn:
        break;
    }
    ForwardArtifacts<Scalar> a;
    const Index bs = b.size, n = b.n;
    a.c_e = comparison_input(b);
    Tensor<Scalar> x;
    if (cfg_.use_ps) {
      pair_scores(a, b, mode);
      x = reshape(a.p_e, {bs, n, n, 1});
    } else {
      x = mccb_.forward(a.c_e, b.x_s, mode);
    }
    for (auto& block : blocks_) {
      const Index f = x.dim(-1);
      x = block.forward(cco(reshape(x, {bs, n, n * f})), b.x_s, mode);
      a.blocks.push_back(x);
    }
    const auto scores = sum_pool(linear(x, head_w_, head_b_), 2);  // [B, N, 1]
    a.p_r = softmax_last(reshape(scores, {bs, n}));
    return a;
  }

  /// C^E = Concat(C^r, C^c, Tile(X^u)); C^c is zero when X^c is disabled.
  Tensor<Scalar> comparison_input(const Batch<Scalar>& b) const {
    const Index n = b.n;
    const auto c_r = cco(concat_last({b.x_r, b.x_h}));
    const auto c_c = cfg_.use_xc ? cco_pairs(b.x_c) : Tensor<Scalar>::zeros({b.size, n, n, 2 * b.x_c.dim(-1)});
    const auto u = repeat_inner(repeat_inner(b.x_u, n), n);
    return concat_last({c_r, c_c, u});
  }

 private:
  Index sa_row_width() const {
    return 2 * cfg_.route_width + static_cast<Index>(cfg_.n_routes) * cfg_.pair_width + cfg_.user_width;
  }

  void pair_scores(ForwardArtifacts<Scalar>& a, const Batch<Scalar>& b, Mode mode) {
    const Index bs = b.size, n = b.n, m = static_cast<Index>(fields_.size());
    const auto parts = gather_fields(a.c_e, field_columns_);
    std::vector<Tensor<Scalar>> d;
    d.reserve(parts.size());
    for (std::size_t f = 0; f < parts.size(); ++f) d.push_back(fields_[f].forward(parts[f], b.x_s, mode));
    const auto stacked = reshape(concat_last(std::span<const Tensor<Scalar>>(d)), {bs, n, n, m, cfg_.widths[2]});
    const auto d_prime = reshape(linear_.forward(stacked, b.x_s, mode), {bs, n, n, m});
    a.field_scores = sub(d_prime, pair_transpose(d_prime, 1));
    a.pooled = sum_pool(a.field_scores, 3);
    a.p_e = sigmoid(a.pooled);
    if (cfg_.distill) {
      const auto d_hat = reshape(teacher_.forward(a.c_e, b.x_s, mode), {bs, n, n});
      a.teacher_logit = sub(d_hat, pair_transpose(d_hat, 1));
      a.p_hat = sigmoid(a.teacher_logit);
    }
  }

  ForwardArtifacts<Scalar> forward_pointwise(const Batch<Scalar>& b, Mode mode) {
    ForwardArtifacts<Scalar> a;
    const auto rows = concat_last({b.x_r, b.x_h, repeat_inner(b.x_u, b.n)});
    a.p_r = softmax_last(reshape(pointwise_.forward(rows, b.x_s, mode), {b.size, b.n}));
    return a;
  }

  ForwardArtifacts<Scalar> forward_attention(const Batch<Scalar>& b, Mode mode) {
    ForwardArtifacts<Scalar> a;
    const Index bs = b.size, n = b.n;
    const auto flat_c = reshape(b.x_c, {bs, n, n * b.x_c.dim(-1)});
    const auto rows = concat_last({b.x_r, b.x_h, flat_c, repeat_inner(b.x_u, n)});
    const auto q = matmul(rows, wq_), k = matmul(rows, wk_), v = matmul(rows, wv_);
    const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(static_cast<Scalar>(wq_.dim(1)));
    a.attention = softmax_last(scale(batch_matmul(q, k, true), inv_sqrt_d));
    const auto mixed = batch_matmul(a.attention, v);
    const auto head_in = concat_last({rows, mixed});
    a.p_r = softmax_last(reshape(pointwise_.forward(head_in, b.x_s, mode), {bs, n}));
    return a;
  }

  ModelConfig cfg_;
  ParamStore<Scalar> store_;
  std::vector<std::vector<Index>> field_columns_;
  std::vector<DSFNet<Scalar>> fields_;
  DSFNet<Scalar> linear_, teacher_, mccb_, pointwise_;
  std::vector<DSFNet<Scalar>> blocks_;
  Tensor<Scalar> head_w_, head_b_;
  Tensor<Scalar> wq_, wk_, wv_;
};

/// Maps canonical-order P^R of batch row `b` back to the sample's order.
template <typename Scalar>
std::vector<double> original_order(const Batch<Scalar>& batch, const Tensor<Scalar>& per_candidate, Index b) {
  const Index n = batch.n;
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(batch.order[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)])] =
        static_cast<double>(per_candidate.values()[static_cast<std::size_t>(b * n + k)]);
  }
  return out;
}

/// Pair matrix [B, N, N] of batch row `b` in the sample's original order.
template <typename Scalar>
FeatureMatrix original_pairs(const Batch<Scalar>& batch, const Tensor<Scalar>& pairs, Index b) {
  const Index n = batch.n;
  const auto& ord = batch.order[static_cast<std::size_t>(b)];
  FeatureMatrix out(n, n);
  for (Index k = 0; k < n; ++k)
    for (Index t = 0; t < n; ++t)
      out(ord[static_cast<std::size_t>(k)], ord[static_cast<std::size_t>(t)]) =
          static_cast<double>(pairs.values()[static_cast<std::size_t>((b * n + k) * n + t)]);
  return out;
}

// ---------------------------------------------------------------------------
// Parameter accounting

/// K * S * (F*h1 + h1*h2 + h2*h3 + h3*h4)
long long approx_param_count(int k, int s, long long f, const std::array<int, 4>& h);

struct ParamCount {
  long long exact = 0;   // every trainable scalar of the instantiated model
  long long approx = 0;  // closed-form approximation, F = C^E width
  double ratio = 0.0;    // exact / approx
  double approx_f32_bytes = 0.0;
  double exact_f32_bytes = 0.0;
};

ParamCount param_count(const ModelConfig& cfg);

}  // namespace ccn

#endif  // CCN_MODEL_HPP
