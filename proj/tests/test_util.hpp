#ifndef CCN_TEST_UTIL_HPP
#define CCN_TEST_UTIL_HPP

#include "ccn/tensor.hpp"

#include <random>
#include <vector>

namespace ccn::test {

template <typename Scalar = double>
Tensor<Scalar> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                             bool requires_grad = false) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Scalar> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = static_cast<Scalar>(u(rng));
  return Tensor<Scalar>(std::move(shape), std::move(v), requires_grad);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace ccn::test

#endif  // CCN_TEST_UTIL_HPP
