#ifndef CCN_DIAGNOSTICS_HPP
#define CCN_DIAGNOSTICS_HPP

#include "ccn/features.hpp"
#include "ccn/grad_check.hpp"
#include "ccn/model.hpp"
#include "ccn/training.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ccn {

/// Small CCN for numeric checks: N = 3, widths 4/4/4/1, S = 2, M = 2.
ModelConfig tiny_config();

/// Random but valid samples shaped for `cfg` (normal features, zero x_c
/// diagonal, labels from random coverage rates).
std::vector<Sample> synthetic_samples(const ModelConfig& cfg, int count, std::uint64_t seed);

/// Overwrites every trainable tensor with U(-bound, bound), zero-init heads included.
template <typename Scalar>
void randomize_params(ParamStore<Scalar>& store, std::uint64_t seed, double bound = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-bound, bound);
  for (const auto& e : store.entries()) {
    if (!e.trainable) continue;
    auto t = e.tensor;
    for (auto& v : t.mutable_data()) v = static_cast<Scalar>(u(rng));
  }
}

struct NamedCheck {
  std::string name;
  GradCheckReport report;
};

/// Central-difference checks of every primitive in f64 over random shapes.
std::vector<NamedCheck> primitive_grad_checks(std::uint64_t seed, int shapes_per_op = 20);

/// Full loss of the tiny CCN (every trainable tensor) in f64 (tol 1e-4 /
/// 1e-5 for the MCCB) and f32 (tol 1e-3), plus the ablation variants.
std::vector<NamedCheck> model_grad_checks(std::uint64_t seed);

}  // namespace ccn

#endif  // CCN_DIAGNOSTICS_HPP
