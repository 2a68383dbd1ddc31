#include "ccn/diagnostics.hpp"

#include "ccn/batch_norm.hpp"
#include "ccn/ops.hpp"

#include <functional>

namespace ccn {

ModelConfig tiny_config() {
  ModelConfig c;
  c.n_routes = 3;
  c.k_blocks = 2;
  c.banks = 2;
  c.widths = {4, 4, 4, 1};
  c.route_width = 3;
  c.pair_width = 2;
  c.user_width = 2;
  c.scenario_width = 3;
  c.fields = FieldPartition::round_robin(c.route_width, c.pair_width, 2);
  return c;
}

std::vector<Sample> synthetic_samples(const ModelConfig& cfg, int count, std::uint64_t seed) {
  auto rng = world::derived_rng(seed, 300, 0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Index n = cfg.n_routes;
  std::vector<Sample> out;
  for (int k = 0; k < count; ++k) {
    Sample s;
    s.sample_id = "syn" + std::to_string(k);
    s.split = "train";
    for (Index i = 0; i < n; ++i) s.routes.push_back({{static_cast<int>(i)}});
    s.x_r = FeatureMatrix(n, cfg.route_width);
    for (Index i = 0; i < s.x_r.size(); ++i) s.x_r.data()[i] = z(rng);
    s.x_u = FeatureRow(cfg.user_width);
    for (Index i = 0; i < s.x_u.size(); ++i) s.x_u[i] = z(rng);
    s.x_s = FeatureRow(cfg.scenario_width);
    for (Index i = 0; i < s.x_s.size(); ++i) s.x_s[i] = u(rng) < 0.5 ? 1.0 : 0.0;
    s.x_c = PairFeatures(n, cfg.pair_width);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        for (Index c = 0; c < cfg.pair_width; ++c) s.x_c(i, j, c) = i == j ? 0.0 : z(rng);
    for (int t = 0; t < 2; ++t) {
      HistoryRecord h;
      h.scenario.assign(static_cast<std::size_t>(cfg.scenario_width), 0.0);
      h.route = FeatureRow(cfg.route_width);
      for (Index c = 0; c < h.route.size(); ++c) h.route[c] = z(rng);
      s.history.push_back(std::move(h));
    }
    for (Index i = 0; i < n; ++i) s.crs.push_back(u(rng));
    const auto labels = world::make_labels(s.crs);
    s.y_r = labels.y_r;
    s.y_e = FeatureMatrix(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) s.y_e(i, j) = labels.y_e[i][j];
    s.l = labels.l;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Primitive checks

namespace {

template <typename Scalar>
Tensor<Scalar> random_tensor(Shape shape, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> z(0.0, sd);
  std::vector<Scalar> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = static_cast<Scalar>(z(rng));
  return Tensor<Scalar>(std::move(shape), std::move(v));
}

Index dim(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

// sum(op(...) * R) with a fixed random R, so every output entry matters.
using Op = std::function<Tensord(std::vector<Tensord>&)>;

GradCheckReport check_op(const Op& op, std::vector<Tensord> inputs, std::mt19937_64& rng) {
  const auto probe = op(inputs);
  const auto weights = random_tensor<double>(probe.shape(), rng);
  for (auto& t : inputs) t.set_requires_grad(true);
  return grad_check<double>([&] { return sum_all(mul(op(inputs), weights)); }, std::span<Tensord>(inputs), 1e-6,
                            1e-4);
}

void merge(GradCheckReport& into, const GradCheckReport& r) {
  if (r.max_rel_error >= into.max_rel_error) {
    into.max_rel_error = r.max_rel_error;
    into.worst = r.worst;
  }
  into.coords_checked += r.coords_checked;
  into.tolerance = r.tolerance;
}

}  // namespace

std::vector<NamedCheck> primitive_grad_checks(std::uint64_t seed, int shapes_per_op) {
  std::mt19937_64 rng(seed);
  std::vector<NamedCheck> out;
  auto run = [&](const std::string& name, const std::function<std::pair<Op, std::vector<Tensord>>()>& make) {
    NamedCheck c{name, {}};
    for (int k = 0; k < shapes_per_op; ++k) {
      auto [op, inputs] = make();
      merge(c.report, check_op(op, std::move(inputs), rng));
    }
    out.push_back(std::move(c));
  };

  run("matmul", [&] {
    const Index b = dim(rng, 1, 3), p = dim(rng, 1, 4), q = dim(rng, 1, 4), r = dim(rng, 1, 4);
    return std::pair{Op([](auto& x) { return matmul(x[0], x[1]); }),
                     std::vector{random_tensor<double>({b, p, q}, rng), random_tensor<double>({q, r}, rng)}};
  });
  run("linear", [&] {
    const Index p = dim(rng, 1, 5), q = dim(rng, 1, 4), r = dim(rng, 1, 4);
    return std::pair{Op([](auto& x) { return linear(x[0], x[1], x[2]); }),
                     std::vector{random_tensor<double>({p, q}, rng), random_tensor<double>({q, r}, rng),
                                 random_tensor<double>({r}, rng)}};
  });
  run("transpose", [&] {
    return std::pair{Op([](auto& x) { return transpose(x[0]); }),
                     std::vector{random_tensor<double>({dim(rng, 1, 4), dim(rng, 1, 4)}, rng)}};
  });
  run("batch_matmul", [&] {
    const Index b = dim(rng, 1, 3), p = dim(rng, 1, 4), q = dim(rng, 1, 4), r = dim(rng, 1, 4);
    const bool t = dim(rng, 0, 1) == 1;
    return std::pair{Op([t](auto& x) { return batch_matmul(x[0], x[1], t); }),
                     std::vector{random_tensor<double>({b, p, q}, rng),
                                 random_tensor<double>(t ? Shape{b, r, q} : Shape{b, q, r}, rng)}};
  });
  run("mixture_linear", [&] {
    const Index b = dim(rng, 1, 3), rows = dim(rng, 1, 4), in = dim(rng, 1, 4), o = dim(rng, 1, 3),
                s = dim(rng, 1, 3);
    return std::pair{Op([](auto& x) { return mixture_linear(x[0], softmax_last(x[1]), x[2], x[3]); }),
                     std::vector{random_tensor<double>({b, rows, in}, rng), random_tensor<double>({b, s}, rng),
                                 random_tensor<double>({s, in * o}, rng), random_tensor<double>({s, o}, rng)}};
  });
  run("add_sub_mul_broadcast", [&] {
    const Index a = dim(rng, 1, 3), f = dim(rng, 1, 4);
    return std::pair{
        Op([](auto& x) { return mul(sub(add(x[0], x[1]), x[2]), x[1]); }),
        std::vector{random_tensor<double>({a, f}, rng), random_tensor<double>({f}, rng), random_tensor<double>({1}, rng)}};
  });
  run("scale", [&] {
    return std::pair{Op([](auto& x) { return scale(x[0], 0.37); }), std::vector{random_tensor<double>({dim(rng, 1, 6)}, rng)}};
  });
  run("relu", [&] {
    return std::pair{Op([](auto& x) { return relu(x[0]); }),
                     std::vector{random_tensor<double>({dim(rng, 1, 4), dim(rng, 1, 4)}, rng)}};
  });
  run("sigmoid", [&] {
    return std::pair{Op([](auto& x) { return sigmoid(x[0]); }),
                     std::vector{random_tensor<double>({dim(rng, 1, 4), dim(rng, 1, 4)}, rng, 3.0)}};
  });
  run("reshape", [&] {
    const Index a = dim(rng, 1, 4), b = dim(rng, 1, 4);
    return std::pair{Op([a, b](auto& x) { return reshape(x[0], {b, a}); }), std::vector{random_tensor<double>({a, b}, rng)}};
  });
  run("concat_last", [&] {
    const Index n = dim(rng, 1, 3), f1 = dim(rng, 1, 3), f2 = dim(rng, 1, 3);
    return std::pair{Op([](auto& x) { return concat_last({x[0], x[1]}); }),
                     std::vector{random_tensor<double>({n, n, f1}, rng), random_tensor<double>({n, n, f2}, rng)}};
  });
  run("concat_rows_slice_rows", [&] {
    const Index r1 = dim(rng, 1, 3), r2 = dim(rng, 1, 3), f = dim(rng, 1, 3);
    return std::pair{Op([r1](auto& x) {
                       const std::vector<Tensord> parts{x[0], x[1]};
                       const auto c = concat_rows(std::span<const Tensord>(parts));
                       return slice_rows(c, r1 > 1 ? 1 : 0, c.dim(0));
                     }),
                     std::vector{random_tensor<double>({r1, f}, rng), random_tensor<double>({r2, f}, rng)}};
  });
  run("tile_rows", [&] {
    return std::pair{Op([](auto& x) { return tile_rows(x[0]); }),
                     std::vector{random_tensor<double>({dim(rng, 1, 4), dim(rng, 1, 3)}, rng)}};
  });
  run("repeat_inner", [&] {
    const Index n = dim(rng, 1, 3);
    return std::pair{Op([n](auto& x) { return repeat_inner(x[0], n); }),
                     std::vector{random_tensor<double>({dim(rng, 1, 3), dim(rng, 1, 3)}, rng)}};
  });
  run("pair_transpose", [&] {
    const Index n = dim(rng, 1, 4);
    const int axis = static_cast<int>(dim(rng, 0, 1));
    Shape s = axis == 0 ? Shape{n, n, dim(rng, 1, 3)} : Shape{dim(rng, 1, 3), n, n, dim(rng, 1, 3)};
    return std::pair{Op([axis](auto& x) { return pair_transpose(x[0], axis); }), std::vector{random_tensor<double>(s, rng)}};
  });
  run("cco", [&] {
    return std::pair{Op([](auto& x) { return cco(x[0]); }),
                     std::vector{random_tensor<double>({dim(rng, 1, 2), dim(rng, 1, 4), dim(rng, 1, 3)}, rng)}};
  });
  run("gather_axis", [&] {
    const Index a = dim(rng, 1, 3), f = dim(rng, 2, 5);
    std::vector<Index> idx;
    for (Index k = 0; k < dim(rng, 1, 6); ++k) idx.push_back(dim(rng, 0, f - 1));
    return std::pair{Op([idx](auto& x) { return gather_axis(x[0], -1, std::span<const Index>(idx)); }),
                     std::vector{random_tensor<double>({a, f}, rng)}};
  });
  run("sum_pool", [&] {
    const int axis = static_cast<int>(dim(rng, 0, 2));
    return std::pair{Op([axis](auto& x) { return sum_pool(x[0], axis); }),
                     std::vector{random_tensor<double>({dim(rng, 1, 3), dim(rng, 1, 3), dim(rng, 1, 3)}, rng)}};
  });
  run("softmax_last", [&] {
    return std::pair{Op([](auto& x) { return softmax_last(x[0]); }),
                     std::vector{random_tensor<double>({dim(rng, 1, 3), dim(rng, 1, 5)}, rng, 2.0)}};
  });
  run("cross_entropy", [&] {
    const Index r = dim(rng, 1, 3), c = dim(rng, 2, 5);
    auto y = random_tensor<double>({r, c}, rng);
    for (auto& v : y.mutable_data()) v = v > 0 ? 1.0 : 0.0;
    return std::pair{Op([y](auto& x) { return cross_entropy(softmax_last(x[0]), y); }),
                     std::vector{random_tensor<double>({r, c}, rng)}};
  });
  for (Mode mode : {Mode::Train, Mode::Eval}) {
    run(mode == Mode::Train ? "batch_norm_train" : "batch_norm_eval", [&, mode] {
      const Index rows = dim(rng, 2, 6), f = dim(rng, 1, 4);
      auto state = std::make_shared<BatchNormState<double>>(BatchNormState<double>::fresh(f));
      state->steps.mutable_data()[0] = 1;
      for (auto& v : state->running_var.mutable_data()) v = 0.5 + std::abs(v);
      return std::pair{Op([state, mode](auto& x) { return batch_norm(x[0], x[1], x[2], *state, mode); }),
                       std::vector{random_tensor<double>({rows, f}, rng), random_tensor<double>({f}, rng),
                                   random_tensor<double>({f}, rng)}};
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model checks

namespace {

template <typename Scalar>
NamedCheck model_check(const std::string& name, ModelConfig cfg, Mode mode, bool mccb_only, double eps, double tol,
                       std::uint64_t seed, std::size_t max_coords) {
  const auto samples = synthetic_samples(cfg, 2, seed);
  std::vector<const Sample*> ptrs{&samples[0], &samples[1]};
  const auto batch = make_batch<Scalar>(std::span<const Sample* const>(ptrs));
  CcnModel<Scalar> model(cfg, seed);
  randomize_params(model.params(), seed + 1);
  model.forward(batch, Mode::Train);  // populate running statistics
  auto params = model.params().trainable();
  // The distillation target is detached, so the differentiated function is
  // the loss with P-hat frozen at the unperturbed parameters.
  Tensor<Scalar> frozen_hat;
  if (cfg.use_ps && cfg.distill) frozen_hat = model.forward(batch, mode).p_hat.detach();
  auto loss_fn = [&]() -> Tensor<Scalar> {
    const auto a = model.forward(batch, mode);
    auto t = total_loss(a, batch, model.config());
    if (!frozen_hat) return t.total;
    const Scalar inv_b = Scalar(1) / static_cast<Scalar>(batch.size);
    const auto distill = scale(cross_entropy(a.p_e, mul(frozen_hat, batch.mask)), inv_b);
    const auto l_p = add(add(t.l_pair, t.l_teacher), distill);
    if (mccb_only) return l_p;
    return add(t.l_r, scale(l_p, static_cast<Scalar>(model.config().lambda)));
  };
  NamedCheck c{name, grad_check<Scalar>(loss_fn, std::span<Tensor<Scalar>>(params), eps, tol, max_coords,
                                        static_cast<unsigned>(seed))};
  return c;
}

}  // namespace

std::vector<NamedCheck> model_grad_checks(std::uint64_t seed) {
  std::vector<NamedCheck> out;
  const auto tiny = tiny_config();
  out.push_back(model_check<double>("ccn_full_f64_eval", tiny, Mode::Eval, false, 1e-6, 1e-4, seed, 0));
  out.push_back(model_check<double>("ccn_full_f64_train_bn", tiny, Mode::Train, false, 1e-6, 1e-4, seed, 0));
  out.push_back(model_check<double>("mccb_f64", tiny, Mode::Eval, true, 1e-6, 1e-5, seed, 0));
  out.push_back(model_check<float>("ccn_full_f32_eval", tiny, Mode::Eval, false, 1e-2, 1e-3, seed, 0));
  out.push_back(model_check<float>("mccb_f32", tiny, Mode::Eval, true, 1e-2, 1e-3, seed, 0));
  auto variant = [&](const std::string& name, bool xc, bool cco, bool ps, bool distill) {
    auto c = tiny;
    c.use_xc = xc;
    c.use_cco = cco;
    c.use_ps = ps;
    c.distill = distill;
    out.push_back(model_check<double>(name, c, Mode::Eval, false, 1e-6, 1e-4, seed, 0));
  };
  variant("pointwise_f64", false, false, false, false);
  variant("self_attention_f64", true, false, false, false);
  variant("ccn_unconstrained_f64", true, true, false, false);
  variant("ccn_plain_ps_f64", true, true, true, false);
  return out;
}

}  // namespace ccn
