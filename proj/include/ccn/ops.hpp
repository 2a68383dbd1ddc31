#ifndef CCN_OPS_HPP
#define CCN_OPS_HPP

#include "ccn/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace ccn {

/// Lower bound applied to probabilities before every log.
inline constexpr double kLogClamp = 1e-7;

namespace detail {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MatMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstMatMap = Eigen::Map<const RowMatrix<Scalar>>;

template <typename Scalar>
ConstMatMap<Scalar> as_matrix(const std::vector<Scalar>& v, Index rows, Index cols) {
  return ConstMatMap<Scalar>(v.data(), rows, cols);
}
template <typename Scalar>
MatMap<Scalar> as_matrix(std::vector<Scalar>& v, Index rows, Index cols) {
  return MatMap<Scalar>(v.data(), rows, cols);
}

// b broadcasts onto a when b's shape is a suffix of a's shape or b is a scalar.
inline bool broadcastable(const Shape& a, const Shape& b) {
  if (numel(b) == 1) return true;
  if (b.size() > a.size()) return false;
  return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

template <typename Scalar>
void check_broadcast(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op) {
  if (!broadcastable(a.shape(), b.shape())) {
    throw DimensionError(std::string(op) + ": cannot broadcast " + to_string(b.shape()) +
                         " onto " + to_string(a.shape()));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

/// [..., p, q] x [q, r] -> [..., p, r]
template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rank() < 1 || b.rank() != 2 || a.dim(-1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
  }
  const Index q = b.dim(0), r = b.dim(1), rows = a.size() / q;
  Shape out_shape = a.shape();
  if (a.rank() == 1) out_shape.insert(out_shape.begin(), 1);
  out_shape.back() = r;
  std::vector<Scalar> out(static_cast<std::size_t>(rows * r));
  detail::as_matrix(out, rows, r).noalias() =
      detail::as_matrix(a.values(), rows, q) * detail::as_matrix(b.values(), q, r);
  if (a.rank() == 1) out_shape.erase(out_shape.begin());
  return detail::make_result<Scalar>(
      std::move(out_shape), std::move(out), {a, b}, [rows, q, r](TensorNode<Scalar>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        auto g = detail::as_matrix(std::as_const(self.grad), rows, r);
        if (pa.requires_grad) {
          detail::as_matrix(pa.grad, rows, q).noalias() +=
              g * detail::as_matrix(std::as_const(pb.value), q, r).transpose();
        }
        if (pb.requires_grad) {
          detail::as_matrix(pb.grad, q, r).noalias() +=
              detail::as_matrix(std::as_const(pa.value), rows, q).transpose() * g;
        }
      });
}

/// x [..., in] * w [in, out] + bias [out]
template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& w,
                      const Tensor<Scalar>& bias) {
  if (w.rank() != 2 || x.dim(-1) != w.dim(0) || bias.size() != w.dim(1)) {
    throw DimensionError("linear: incompatible shapes x" + to_string(x.shape()) + " w" +
                         to_string(w.shape()) + " b" + to_string(bias.shape()));
  }
  const Index in = w.dim(0), out_dim = w.dim(1), rows = x.size() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  std::vector<Scalar> out(static_cast<std::size_t>(rows * out_dim));
  auto o = detail::as_matrix(out, rows, out_dim);
  o.noalias() = detail::as_matrix(x.values(), rows, in) * detail::as_matrix(w.values(), in, out_dim);
  o.rowwise() += detail::as_matrix(bias.values(), 1, out_dim).row(0);
  return detail::make_result<Scalar>(
      std::move(out_shape), std::move(out), {x, w, bias},
      [rows, in, out_dim](TensorNode<Scalar>& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        auto g = detail::as_matrix(std::as_const(self.grad), rows, out_dim);
        if (px.requires_grad) {
          detail::as_matrix(px.grad, rows, in).noalias() +=
              g * detail::as_matrix(std::as_const(pw.value), in, out_dim).transpose();
        }
        if (pw.requires_grad) {
          detail::as_matrix(pw.grad, in, out_dim).noalias() +=
              detail::as_matrix(std::as_const(px.value), rows, in).transpose() * g;
        }
        if (pb.requires_grad) {
          detail::as_matrix(pb.grad, 1, out_dim) += g.colwise().sum();
        }
      });
}

/// Rank-2 transpose.
template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& a) {
  if (a.rank() != 2) throw DimensionError("transpose: expected rank 2, got " + to_string(a.shape()));
  const Index r = a.dim(0), c = a.dim(1);
  std::vector<Scalar> out(a.values().size());
  detail::as_matrix(out, c, r) = detail::as_matrix(a.values(), r, c).transpose();
  return detail::make_result<Scalar>({c, r}, std::move(out), {a}, [r, c](TensorNode<Scalar>& self) {
    auto& p = *self.parents[0];
    detail::as_matrix(p.grad, r, c) += detail::as_matrix(std::as_const(self.grad), c, r).transpose();
  });
}

/// Per-sample batched product: a [B, p, q] x b [B, q, r] -> [B, p, r], or
/// with `transpose_b` a [B, p, q] x b[B, r, q]^T.
template <typename Scalar>
Tensor<Scalar> batch_matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b, bool transpose_b = false) {
  const bool ok = a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) &&
                  a.dim(2) == (transpose_b ? b.dim(2) : b.dim(1));
  if (!ok) {
    throw DimensionError("batch_matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
  }
  const Index bs = a.dim(0), p = a.dim(1), q = a.dim(2), r = transpose_b ? b.dim(1) : b.dim(2);
  std::vector<Scalar> out(static_cast<std::size_t>(bs * p * r));
  for (Index k = 0; k < bs; ++k) {
    detail::ConstMatMap<Scalar> am(a.values().data() + k * p * q, p, q);
    auto om = detail::MatMap<Scalar>(out.data() + k * p * r, p, r);
    if (transpose_b) {
      om.noalias() = am * detail::ConstMatMap<Scalar>(b.values().data() + k * r * q, r, q).transpose();
    } else {
      om.noalias() = am * detail::ConstMatMap<Scalar>(b.values().data() + k * q * r, q, r);
    }
  }
  return detail::make_result<Scalar>(
      {bs, p, r}, std::move(out), {a, b}, [bs, p, q, r, transpose_b](TensorNode<Scalar>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (Index k = 0; k < bs; ++k) {
          detail::ConstMatMap<Scalar> g(self.grad.data() + k * p * r, p, r);
          detail::ConstMatMap<Scalar> am(pa.value.data() + k * p * q, p, q);
          if (transpose_b) {
            detail::ConstMatMap<Scalar> bm(pb.value.data() + k * r * q, r, q);
            if (pa.requires_grad) detail::MatMap<Scalar>(pa.grad.data() + k * p * q, p, q).noalias() += g * bm;
            if (pb.requires_grad) {
              detail::MatMap<Scalar>(pb.grad.data() + k * r * q, r, q).noalias() += g.transpose() * am;
            }
          } else {
            detail::ConstMatMap<Scalar> bm(pb.value.data() + k * q * r, q, r);
            if (pa.requires_grad) {
              detail::MatMap<Scalar>(pa.grad.data() + k * p * q, p, q).noalias() += g * bm.transpose();
            }
            if (pb.requires_grad) {
              detail::MatMap<Scalar>(pb.grad.data() + k * q * r, q, r).noalias() += am.transpose() * g;
            }
          }
        }
      });
}

/// Gate-mixed linear layer over a parameter bank.
///
/// x [B, ..., in], gate [B, S], w_bank [S, in*out], b_bank [S, out].
/// Sample k uses W_k = sum_s gate[k,s] W_s and b_k = sum_s gate[k,s] b_s.
template <typename Scalar>
Tensor<Scalar> mixture_linear(const Tensor<Scalar>& x, const Tensor<Scalar>& gate, const Tensor<Scalar>& w_bank,
                              const Tensor<Scalar>& b_bank) {
  const bool ok = x.rank() >= 2 && gate.rank() == 2 && w_bank.rank() == 2 && b_bank.rank() == 2 &&
                  gate.dim(0) == x.dim(0) && gate.dim(1) == w_bank.dim(0) && b_bank.dim(0) == w_bank.dim(0) &&
                  w_bank.dim(1) == x.dim(-1) * b_bank.dim(1);
  if (!ok) {
    throw DimensionError("mixture_linear: incompatible shapes x" + to_string(x.shape()) + " gate" +
                         to_string(gate.shape()) + " w" + to_string(w_bank.shape()) + " b" +
                         to_string(b_bank.shape()));
  }
  const Index bs = x.dim(0), s = gate.dim(1), in = x.dim(-1), out_dim = b_bank.dim(1);
  const Index rows = x.size() / (bs * in);
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  // Mixed parameters, one [in*out + out] block per sample.
  auto mixed = std::make_shared<std::vector<Scalar>>(static_cast<std::size_t>(bs * (in * out_dim + out_dim)));
  std::vector<Scalar> out(static_cast<std::size_t>(bs * rows * out_dim));
  {
    auto g = detail::as_matrix(gate.values(), bs, s);
    auto wm = detail::as_matrix(w_bank.values(), s, in * out_dim);
    auto bm = detail::as_matrix(b_bank.values(), s, out_dim);
    for (Index k = 0; k < bs; ++k) {
      Scalar* wk = mixed->data() + k * (in * out_dim + out_dim);
      detail::MatMap<Scalar>(wk, 1, in * out_dim).noalias() = g.row(k) * wm;
      detail::MatMap<Scalar>(wk + in * out_dim, 1, out_dim).noalias() = g.row(k) * bm;
      auto o = detail::MatMap<Scalar>(out.data() + k * rows * out_dim, rows, out_dim);
      o.noalias() = detail::ConstMatMap<Scalar>(x.values().data() + k * rows * in, rows, in) *
                    detail::ConstMatMap<Scalar>(wk, in, out_dim);
      o.rowwise() += detail::ConstMatMap<Scalar>(wk + in * out_dim, 1, out_dim).row(0);
    }
  }
  return detail::make_result<Scalar>(
      std::move(out_shape), std::move(out), {x, gate, w_bank, b_bank},
      [bs, s, in, out_dim, rows, mixed](TensorNode<Scalar>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pw = *self.parents[2];
        auto& pb = *self.parents[3];
        const bool need_params = pg.requires_grad || pw.requires_grad || pb.requires_grad;
        detail::RowMatrix<Scalar> dwk(in, out_dim);
        Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dbk(out_dim);
        for (Index k = 0; k < bs; ++k) {
          const Scalar* wk = mixed->data() + k * (in * out_dim + out_dim);
          detail::ConstMatMap<Scalar> gy(self.grad.data() + k * rows * out_dim, rows, out_dim);
          if (px.requires_grad) {
            detail::MatMap<Scalar>(px.grad.data() + k * rows * in, rows, in).noalias() +=
                gy * detail::ConstMatMap<Scalar>(wk, in, out_dim).transpose();
          }
          if (!need_params) continue;
          dwk.noalias() = detail::ConstMatMap<Scalar>(px.value.data() + k * rows * in, rows, in).transpose() * gy;
          dbk.noalias() = gy.colwise().sum();
          detail::ConstMatMap<Scalar> dw_flat(dwk.data(), 1, in * out_dim);
          for (Index t = 0; t < s; ++t) {
            const Scalar g = pg.value[static_cast<std::size_t>(k * s + t)];
            if (pw.requires_grad) detail::MatMap<Scalar>(pw.grad.data() + t * in * out_dim, 1, in * out_dim) += g * dw_flat;
            if (pb.requires_grad) detail::MatMap<Scalar>(pb.grad.data() + t * out_dim, 1, out_dim) += g * dbk;
            if (pg.requires_grad) {
              const Scalar dot_w = detail::ConstMatMap<Scalar>(pw.value.data() + t * in * out_dim, 1, in * out_dim)
                                       .cwiseProduct(dw_flat)
                                       .sum();
              const Scalar dot_b =
                  detail::ConstMatMap<Scalar>(pb.value.data() + t * out_dim, 1, out_dim).cwiseProduct(dbk).sum();
              pg.grad[static_cast<std::size_t>(k * s + t)] += dot_w + dot_b;
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Elementwise

namespace detail {

template <typename Scalar, typename Fwd, typename GradA, typename GradB>
Tensor<Scalar> binary(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* name, Fwd fwd,
                      GradA ga, GradB gb) {
  check_broadcast(a, b, name);
  const std::size_t n = a.values().size(), nb = b.values().size();
  std::vector<Scalar> out(n);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t k = 0; k < n; ++k) out[k] = fwd(av[k], bv[k % nb]);
  return make_result<Scalar>(a.shape(), std::move(out), {a, b}, [n, nb, ga, gb](TensorNode<Scalar>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t k = 0; k < n; ++k) {
      const Scalar g = self.grad[k];
      const Scalar x = pa.value[k], y = pb.value[k % nb];
      if (pa.requires_grad) pa.grad[k] += ga(g, x, y);
      if (pb.requires_grad) pb.grad[k % nb] += gb(g, x, y);
    }
  });
}

template <typename Scalar, typename Fwd, typename Deriv>
Tensor<Scalar> unary(const Tensor<Scalar>& a, Fwd fwd, Deriv deriv) {
  std::vector<Scalar> out(a.values().size());
  const auto& av = a.values();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = fwd(av[k]);
  return make_result<Scalar>(a.shape(), std::move(out), {a}, [deriv](TensorNode<Scalar>& self) {
    auto& p = *self.parents[0];
    for (std::size_t k = 0; k < self.value.size(); ++k) {
      p.grad[k] += self.grad[k] * deriv(p.value[k], self.value[k]);
    }
  });
}

}  // namespace detail

/// a + b with b broadcast over a's leading dims (or a scalar).
template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::binary(
      a, b, "add", [](Scalar x, Scalar y) { return x + y; },
      [](Scalar g, Scalar, Scalar) { return g; }, [](Scalar g, Scalar, Scalar) { return g; });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::binary(
      a, b, "sub", [](Scalar x, Scalar y) { return x - y; },
      [](Scalar g, Scalar, Scalar) { return g; }, [](Scalar g, Scalar, Scalar) { return -g; });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::binary(
      a, b, "mul", [](Scalar x, Scalar y) { return x * y; },
      [](Scalar g, Scalar, Scalar y) { return g * y; },
      [](Scalar g, Scalar x, Scalar) { return g * x; });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar s) {
  return detail::unary(
      a, [s](Scalar x) { return s * x; }, [s](Scalar, Scalar) { return s; });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a) {
  return detail::unary(
      a, [](Scalar x) { return x > Scalar(0) ? x : Scalar(0); },
      [](Scalar x, Scalar) { return x > Scalar(0) ? Scalar(1) : Scalar(0); });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& a) {
  return detail::unary(
      a,
      [](Scalar x) {
        // Split by sign so exp never overflows.
        if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
        const Scalar e = std::exp(x);
        return e / (Scalar(1) + e);
      },
      [](Scalar, Scalar y) { return y * (Scalar(1) - y); });
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw DimensionError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  return detail::make_result<Scalar>(std::move(shape), a.values(), {a}, [](TensorNode<Scalar>& self) {
    auto& p = *self.parents[0];
    for (std::size_t k = 0; k < self.grad.size(); ++k) p.grad[k] += self.grad[k];
  });
}

/// Concatenates along the last axis, left to right.
template <typename Scalar>
Tensor<Scalar> concat_last(std::span<const Tensor<Scalar>> xs) {
  if (xs.empty()) throw DimensionError("concat_last: no inputs");
  Shape lead = xs[0].shape();
  lead.pop_back();
  const Index outer = numel(lead);
  std::vector<Index> widths;
  Index total = 0;
  for (const auto& x : xs) {
    Shape l = x.shape();
    l.pop_back();
    if (l != lead) {
      throw DimensionError("concat_last: leading dims " + to_string(x.shape()) + " vs " +
                           to_string(xs[0].shape()));
    }
    widths.push_back(x.dim(-1));
    total += x.dim(-1);
  }
  std::vector<Scalar> out(static_cast<std::size_t>(outer * total));
  Index offset = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const Index w = widths[t];
    const auto& v = xs[t].values();
    for (Index o = 0; o < outer; ++o) {
      std::copy_n(v.begin() + o * w, w, out.begin() + o * total + offset);
    }
    offset += w;
  }
  Shape shape = lead;
  shape.push_back(total);
  std::vector<Tensor<Scalar>> inputs(xs.begin(), xs.end());
  return detail::make_result<Scalar>(
      std::move(shape), std::move(out), std::move(inputs),
      [outer, total, widths](TensorNode<Scalar>& self) {
        Index off = 0;
        for (std::size_t t = 0; t < widths.size(); ++t) {
          auto& p = *self.parents[t];
          const Index w = widths[t];
          if (p.requires_grad) {
            for (Index o = 0; o < outer; ++o) {
              for (Index c = 0; c < w; ++c) p.grad[o * w + c] += self.grad[o * total + off + c];
            }
          }
          off += w;
        }
      });
}

template <typename Scalar>
Tensor<Scalar> concat_last(std::initializer_list<Tensor<Scalar>> xs) {
  return concat_last(std::span<const Tensor<Scalar>>(xs.begin(), xs.size()));
}

/// Concatenates along axis 0; trailing dims must agree.
template <typename Scalar>
Tensor<Scalar> concat_rows(std::span<const Tensor<Scalar>> xs) {
  if (xs.empty()) throw DimensionError("concat_rows: no inputs");
  Shape tail(xs[0].shape().begin() + 1, xs[0].shape().end());
  Index rows = 0;
  std::vector<Scalar> out;
  for (const auto& x : xs) {
    if (!std::equal(tail.begin(), tail.end(), x.shape().begin() + 1, x.shape().end())) {
      throw DimensionError("concat_rows: trailing dims " + to_string(x.shape()) + " vs " +
                           to_string(xs[0].shape()));
    }
    rows += x.dim(0);
    out.insert(out.end(), x.values().begin(), x.values().end());
  }
  Shape shape = tail;
  shape.insert(shape.begin(), rows);
  std::vector<Tensor<Scalar>> inputs(xs.begin(), xs.end());
  return detail::make_result<Scalar>(std::move(shape), std::move(out), std::move(inputs),
                                     [](TensorNode<Scalar>& self) {
                                       std::size_t off = 0;
                                       for (auto& p : self.parents) {
                                         const std::size_t n = p->value.size();
                                         if (p->requires_grad) {
                                           for (std::size_t k = 0; k < n; ++k) p->grad[k] += self.grad[off + k];
                                         }
                                         off += n;
                                       }
                                     });
}

/// Rows [begin, end) along axis 0.
template <typename Scalar>
Tensor<Scalar> slice_rows(const Tensor<Scalar>& x, Index begin, Index end) {
  if (begin < 0 || end > x.dim(0) || begin >= end) {
    throw DimensionError("slice_rows: bad range for shape " + to_string(x.shape()));
  }
  const Index stride = x.size() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = end - begin;
  std::vector<Scalar> out(x.values().begin() + begin * stride, x.values().begin() + end * stride);
  return detail::make_result<Scalar>(std::move(shape), std::move(out), {x},
                                     [off = begin * stride](TensorNode<Scalar>& self) {
                                       auto& p = *self.parents[0];
                                       for (std::size_t k = 0; k < self.grad.size(); ++k) {
                                         p.grad[off + static_cast<Index>(k)] += self.grad[k];
                                       }
                                     });
}

/// [N, F] -> [N, N, F] with out[i][j] = x[i].
template <typename Scalar>
Tensor<Scalar> tile_rows(const Tensor<Scalar>& x) {
  if (x.rank() != 2) throw DimensionError("tile_rows: expected rank 2, got " + to_string(x.shape()));
  const Index n = x.dim(0), f = x.dim(1);
  std::vector<Scalar> out(static_cast<std::size_t>(n * n * f));
  const auto& v = x.values();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) std::copy_n(v.begin() + i * f, f, out.begin() + (i * n + j) * f);
  }
  return detail::make_result<Scalar>({n, n, f}, std::move(out), {x}, [n, f](TensorNode<Scalar>& self) {
    auto& p = *self.parents[0];
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        for (Index c = 0; c < f; ++c) p.grad[i * f + c] += self.grad[(i * n + j) * f + c];
      }
    }
  });
}

/// Swaps the pair axes (axis, axis + 1): out[..][i][j] = x[..][j][i].
/// The default swaps the first two axes.
template <typename Scalar>
Tensor<Scalar> pair_transpose(const Tensor<Scalar>& x, int axis = 0) {
  if (axis < 0 || axis + 1 >= x.rank() || x.dim(axis) != x.dim(axis + 1)) {
    throw DimensionError("pair_transpose: axes " + std::to_string(axis) + "," + std::to_string(axis + 1) +
                         " must be equal, got " + to_string(x.shape()));
  }
  const Index n = x.dim(axis);
  Index outer = 1;
  for (int a = 0; a < axis; ++a) outer *= x.dim(a);
  const Index f = x.size() / (outer * n * n);
  std::vector<Scalar> out(x.values().size());
  const auto& v = x.values();
  for (Index o = 0; o < outer; ++o) {
    const Index base = o * n * n;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        std::copy_n(v.begin() + (base + j * n + i) * f, f, out.begin() + (base + i * n + j) * f);
      }
    }
  }
  return detail::make_result<Scalar>(x.shape(), std::move(out), {x}, [outer, n, f](TensorNode<Scalar>& self) {
    auto& p = *self.parents[0];
    for (Index o = 0; o < outer; ++o) {
      const Index base = o * n * n;
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          for (Index c = 0; c < f; ++c) p.grad[(base + j * n + i) * f + c] += self.grad[(base + i * n + j) * f + c];
        }
      }
    }
  });
}

/// [..., F] -> [..., n, F] with every one of the n copies equal to the
/// source row. tile_rows on a batch is repeat_inner on the flattened rows.
template <typename Scalar>
Tensor<Scalar> repeat_inner(const Tensor<Scalar>& x, Index n) {
  if (n < 1) throw DimensionError("repeat_inner: n must be positive");
  const Index f = x.dim(-1), rows = x.size() / f;
  Shape shape = x.shape();
  shape.insert(shape.end() - 1, n);
  std::vector<Scalar> out(static_cast<std::size_t>(rows * n * f));
  const auto& v = x.values();
  for (Index r = 0; r < rows; ++r) {
    for (Index t = 0; t < n; ++t) std::copy_n(v.begin() + r * f, f, out.begin() + (r * n + t) * f);
  }
  return detail::make_result<Scalar>(std::move(shape), std::move(out), {x}, [rows, n, f](TensorNode<Scalar>& self) {
    auto& p = *self.parents[0];
    for (Index r = 0; r < rows; ++r) {
      for (Index t = 0; t < n; ++t) {
        for (Index c = 0; c < f; ++c) p.grad[r * f + c] += self.grad[(r * n + t) * f + c];
      }
    }
  });
}

/// Selects entries `index` along `axis` (gather / permutation).
template <typename Scalar>
Tensor<Scalar> gather_axis(const Tensor<Scalar>& x, int axis, std::span<const Index> index) {
  if (axis < 0) axis += x.rank();
  if (axis < 0 || axis >= x.rank()) throw DimensionError("gather_axis: bad axis");
  const Index len = x.dim(axis);
  for (Index k : index) {
    if (k < 0 || k >= len) {
      throw DimensionError("gather_axis: index " + std::to_string(k) + " out of range for " +
                           to_string(x.shape()));
    }
  }
  Index outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= x.dim(a);
  for (int a = axis + 1; a < x.rank(); ++a) inner *= x.dim(a);
  const Index m = static_cast<Index>(index.size());
  Shape shape = x.shape();
  shape[static_cast<std::size_t>(axis)] = m;
  std::vector<Scalar> out(static_cast<std::size_t>(outer * m * inner));
  const auto& v = x.values();
  for (Index o = 0; o < outer; ++o) {
    for (Index k = 0; k < m; ++k) {
      std::copy_n(v.begin() + (o * len + index[k]) * inner, inner, out.begin() + (o * m + k) * inner);
    }
  }
  std::vector<Index> idx(index.begin(), index.end());
  return detail::make_result<Scalar>(
      std::move(shape), std::move(out), {x}, [outer, inner, len, idx](TensorNode<Scalar>& self) {
        auto& p = *self.parents[0];
        const Index m = static_cast<Index>(idx.size());
        for (Index o = 0; o < outer; ++o) {
          for (Index k = 0; k < m; ++k) {
            for (Index c = 0; c < inner; ++c) {
              p.grad[(o * len + idx[k]) * inner + c] += self.grad[(o * m + k) * inner + c];
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions and normalizers

/// Sums over `axis` and drops it. Accumulation runs in axis order, so a
/// caller re-summing the same slice left to right gets identical bits.
template <typename Scalar>
Tensor<Scalar> sum_pool(const Tensor<Scalar>& x, int axis) {
  if (axis < 0) axis += x.rank();
  if (axis < 0 || axis >= x.rank()) throw DimensionError("sum_pool: bad axis for " + to_string(x.shape()));
  Index outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= x.dim(a);
  for (int a = axis + 1; a < x.rank(); ++a) inner *= x.dim(a);
  const Index len = x.dim(axis);
  Shape shape = x.shape();
  shape.erase(shape.begin() + axis);
  if (shape.empty()) shape.push_back(1);
  std::vector<Scalar> out(static_cast<std::size_t>(outer * inner), Scalar(0));
  const auto& v = x.values();
  for (Index o = 0; o < outer; ++o) {
    for (Index c = 0; c < inner; ++c) {
      Scalar acc(0);
      for (Index k = 0; k < len; ++k) acc += v[(o * len + k) * inner + c];
      out[o * inner + c] = acc;
    }
  }
  return detail::make_result<Scalar>(
      std::move(shape), std::move(out), {x}, [outer, inner, len](TensorNode<Scalar>& self) {
        auto& p = *self.parents[0];
        for (Index o = 0; o < outer; ++o) {
          for (Index k = 0; k < len; ++k) {
            for (Index c = 0; c < inner; ++c) p.grad[(o * len + k) * inner + c] += self.grad[o * inner + c];
          }
        }
      });
}

template <typename Scalar>
Tensor<Scalar> sum_all(const Tensor<Scalar>& x) {
  Scalar acc(0);
  for (Scalar v : x.values()) acc += v;
  return detail::make_result<Scalar>({1}, {acc}, {x}, [](TensorNode<Scalar>& self) {
    auto& p = *self.parents[0];
    for (auto& g : p.grad) g += self.grad[0];
  });
}

/// Softmax over the last axis.
template <typename Scalar>
Tensor<Scalar> softmax_last(const Tensor<Scalar>& x) {
  const Index f = x.dim(-1), rows = x.size() / f;
  std::vector<Scalar> out(x.values().size());
  const auto& v = x.values();
  for (Index r = 0; r < rows; ++r) {
    const Scalar* in = v.data() + r * f;
    Scalar* o = out.data() + r * f;
    const Scalar mx = *std::max_element(in, in + f);
    Scalar z(0);
    for (Index c = 0; c < f; ++c) z += (o[c] = std::exp(in[c] - mx));
    for (Index c = 0; c < f; ++c) o[c] /= z;
  }
  return detail::make_result<Scalar>(x.shape(), std::move(out), {x}, [rows, f](TensorNode<Scalar>& self) {
    auto& p = *self.parents[0];
    for (Index r = 0; r < rows; ++r) {
      const Scalar* y = self.value.data() + r * f;
      const Scalar* g = self.grad.data() + r * f;
      Scalar dot(0);
      for (Index c = 0; c < f; ++c) dot += g[c] * y[c];
      for (Index c = 0; c < f; ++c) p.grad[r * f + c] += y[c] * (g[c] - dot);
    }
  });
}

/// -sum(y * log(max(p, 1e-7))). y is a constant weight (one-hot, binary
/// mask or detached soft target).
template <typename Scalar>
Tensor<Scalar> cross_entropy(const Tensor<Scalar>& p, const Tensor<Scalar>& y) {
  if (p.shape() != y.shape()) {
    throw DimensionError("cross_entropy: shape mismatch " + to_string(p.shape()) + " vs " +
                         to_string(y.shape()));
  }
  const Scalar floor = static_cast<Scalar>(kLogClamp);
  const auto& pv = p.values();
  const auto& yv = y.values();
  Scalar loss(0);
  for (std::size_t k = 0; k < pv.size(); ++k) {
    if (yv[k] != Scalar(0)) loss -= yv[k] * std::log(std::max(pv[k], floor));
  }
  Tensor<Scalar> target = y.detach();
  return detail::make_result<Scalar>({1}, {loss}, {p, target}, [floor](TensorNode<Scalar>& self) {
    auto& pp = *self.parents[0];
    const auto& yy = self.parents[1]->value;
    const Scalar g = self.grad[0];
    for (std::size_t k = 0; k < pp.value.size(); ++k) {
      if (yy[k] != Scalar(0) && pp.value[k] > floor) pp.grad[k] -= g * yy[k] / pp.value[k];
    }
  });
}

}  // namespace ccn

#endif  // CCN_OPS_HPP
