#ifndef CCN_GRAD_CHECK_HPP
#define CCN_GRAD_CHECK_HPP

#include "ccn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ccn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t coords_checked = 0;
  std::string worst;  // "<tensor #>[<flat index>]"
  bool passed() const { return max_rel_error < tolerance; }
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences. `f` must rebuild its graph from `wrt` on every call.
///
/// Error per coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|),
/// i.e. relative for large gradients and absolute near zero.
/// `max_coords` > 0 samples that many coordinates per tensor (seeded).
template <typename Scalar>
GradCheckReport grad_check(const std::function<Tensor<Scalar>()>& f,
                           std::span<Tensor<Scalar>> wrt, double eps, double tol,
                           std::size_t max_coords = 0, unsigned seed = 0) {
  for (auto& t : wrt) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor<Scalar> loss = f();
  backward(loss);

  GradCheckReport report;
  report.tolerance = tol;
  std::mt19937 rng(seed);
  for (std::size_t ti = 0; ti < wrt.size(); ++ti) {
    auto& t = wrt[ti];
    std::vector<Scalar> analytic(t.grad().begin(), t.grad().end());
    if (analytic.empty()) analytic.assign(static_cast<std::size_t>(t.size()), Scalar(0));
    std::vector<Index> coords(static_cast<std::size_t>(t.size()));
    for (Index k = 0; k < t.size(); ++k) coords[static_cast<std::size_t>(k)] = k;
    if (max_coords > 0 && coords.size() > max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
    }
    auto data = t.mutable_data();
    for (Index k : coords) {
      const Scalar orig = data[k];
      data[k] = static_cast<Scalar>(orig + eps);
      const double up = f().item();
      data[k] = static_cast<Scalar>(orig - eps);
      const double down = f().item();
      data[k] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[static_cast<std::size_t>(k)];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++report.coords_checked;
      if (err > report.max_rel_error || report.worst.empty()) {
        if (err >= report.max_rel_error) {
          report.max_rel_error = err;
          report.worst = "#" + std::to_string(ti) + "[" + std::to_string(k) + "]";
        }
      }
    }
  }
  return report;
}

template <typename Scalar>
GradCheckReport grad_check(const std::function<Tensor<Scalar>(const Tensor<Scalar>&)>& f,
                           Tensor<Scalar> x, double eps, double tol) {
  std::vector<Tensor<Scalar>> wrt{x};
  return grad_check<Scalar>([&] { return f(wrt[0]); }, std::span<Tensor<Scalar>>(wrt), eps, tol);
}

}  // namespace ccn

#endif  // CCN_GRAD_CHECK_HPP
