#ifndef CCN_BATCH_NORM_HPP
#define CCN_BATCH_NORM_HPP

#include "ccn/ops.hpp"
#include "ccn/tensor.hpp"

#include <atomic>
#include <cmath>
#include <iostream>

namespace ccn {

enum class Mode { Train, Eval };

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Running statistics of one batch-norm layer. The tensors are shared with
/// the owning parameter store so checkpoints pick them up.
template <typename Scalar>
struct BatchNormState {
  Tensor<Scalar> running_mean;  // [F]
  Tensor<Scalar> running_var;   // [F]
  Tensor<Scalar> steps;         // [1], number of train-mode updates

  static BatchNormState fresh(Index features) {
    return {Tensor<Scalar>::zeros({features}), Tensor<Scalar>::ones({features}),
            Tensor<Scalar>::zeros({1})};
  }
};

namespace detail {
inline std::atomic<bool>& untrained_bn_warned() {
  static std::atomic<bool> flag{false};
  return flag;
}
}  // namespace detail

/// Batch normalization over the last axis; every leading dim counts as
/// batch. Train mode uses batch statistics and updates the running ones
/// with momentum; eval mode uses the running statistics.
template <typename Scalar>
Tensor<Scalar> batch_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
                          const Tensor<Scalar>& beta, BatchNormState<Scalar>& state, Mode mode,
                          double eps = kBatchNormEps, double momentum = kBatchNormMomentum) {
  const Index f = x.dim(-1), rows = x.size() / f;
  if (gamma.size() != f || beta.size() != f || state.running_mean.size() != f) {
    throw DimensionError("batch_norm: feature width " + std::to_string(f) + " vs gamma" +
                         to_string(gamma.shape()));
  }
  const auto& xv = x.values();
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  std::vector<Scalar> mean(static_cast<std::size_t>(f), Scalar(0));
  std::vector<Scalar> inv_std(static_cast<std::size_t>(f));

  if (mode == Mode::Train) {
    std::vector<double> m(static_cast<std::size_t>(f), 0.0), v(static_cast<std::size_t>(f), 0.0);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < f; ++c) m[c] += xv[r * f + c];
    for (auto& a : m) a /= static_cast<double>(rows);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < f; ++c) {
        const double d = xv[r * f + c] - m[c];
        v[c] += d * d;
      }
    auto rm = state.running_mean.mutable_data();
    auto rv = state.running_var.mutable_data();
    for (Index c = 0; c < f; ++c) {
      const double var = v[c] / static_cast<double>(rows);
      mean[c] = static_cast<Scalar>(m[c]);
      inv_std[c] = static_cast<Scalar>(1.0 / std::sqrt(var + eps));
      const double unbiased = rows > 1 ? v[c] / static_cast<double>(rows - 1) : var;
      rm[c] = static_cast<Scalar>((1.0 - momentum) * rm[c] + momentum * m[c]);
      rv[c] = static_cast<Scalar>((1.0 - momentum) * rv[c] + momentum * unbiased);
    }
    state.steps.mutable_data()[0] += Scalar(1);
  } else {
    if (state.steps.item() == Scalar(0) && !detail::untrained_bn_warned().exchange(true)) {
      std::clog << "[ccn] warning: eval-mode batch_norm before any training step; "
                   "using initial statistics (mean 0, var 1)\n";
    }
    const auto& rm = state.running_mean.values();
    const auto& rv = state.running_var.values();
    for (Index c = 0; c < f; ++c) {
      mean[c] = rm[c];
      inv_std[c] = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(rv[c]) + eps));
    }
  }

  std::vector<Scalar> xhat(xv.size()), out(xv.size());
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < f; ++c) {
      const Index k = r * f + c;
      xhat[k] = (xv[k] - mean[c]) * inv_std[c];
      out[k] = gv[c] * xhat[k] + bv[c];
    }
  }
  const bool train = mode == Mode::Train;
  return detail::make_result<Scalar>(
      x.shape(), std::move(out), {x, gamma, beta},
      [rows, f, train, inv_std = std::move(inv_std), xhat = std::move(xhat)](TensorNode<Scalar>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const auto& g = self.grad;
        std::vector<Scalar> sum_dy(static_cast<std::size_t>(f), Scalar(0)),
            sum_dy_xhat(static_cast<std::size_t>(f), Scalar(0));
        for (Index r = 0; r < rows; ++r) {
          for (Index c = 0; c < f; ++c) {
            sum_dy[c] += g[r * f + c];
            sum_dy_xhat[c] += g[r * f + c] * xhat[r * f + c];
          }
        }
        if (pg.requires_grad)
          for (Index c = 0; c < f; ++c) pg.grad[c] += sum_dy_xhat[c];
        if (pb.requires_grad)
          for (Index c = 0; c < f; ++c) pb.grad[c] += sum_dy[c];
        if (!px.requires_grad) return;
        const Scalar inv_rows = Scalar(1) / static_cast<Scalar>(rows);
        for (Index r = 0; r < rows; ++r) {
          for (Index c = 0; c < f; ++c) {
            const Index k = r * f + c;
            const Scalar gam = pg.value[c];
            if (train) {
              px.grad[k] += gam * inv_std[c] *
                            (g[k] - sum_dy[c] * inv_rows - xhat[k] * sum_dy_xhat[c] * inv_rows);
            } else {
              px.grad[k] += gam * inv_std[c] * g[k];
            }
          }
        }
      });
}

}  // namespace ccn

#endif  // CCN_BATCH_NORM_HPP
