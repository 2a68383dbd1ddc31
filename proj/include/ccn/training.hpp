#ifndef CCN_TRAINING_HPP
#define CCN_TRAINING_HPP

#include "ccn/features.hpp"
#include "ccn/model.hpp"
#include "ccn/ops.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccn {

// ---------------------------------------------------------------------------
// Losses

struct LossBreakdown {
  double l_r = 0.0;
  double l_pair = 0.0;
  double l_teacher = 0.0;
  double l_distill = 0.0;
  double l_p = 0.0;
  double total = 0.0;
};

template <typename Scalar>
struct LossTerms {
  Tensor<Scalar> l_r, l_pair, l_teacher, l_distill, total;

  LossBreakdown values() const {
    LossBreakdown b;
    auto v = [](const Tensor<Scalar>& t) { return t ? static_cast<double>(t.item()) : 0.0; };
    b.l_r = v(l_r);
    b.l_pair = v(l_pair);
    b.l_teacher = v(l_teacher);
    b.l_distill = v(l_distill);
    b.l_p = b.l_pair + b.l_teacher + b.l_distill;
    b.total = v(total);
    return b;
  }
};

/// -sum Y^R log P^R, averaged over the batch.
template <typename Scalar>
Tensor<Scalar> loss_route(const Tensor<Scalar>& p_r, const Tensor<Scalar>& y_r) {
  return scale(cross_entropy(p_r, y_r), Scalar(1) / static_cast<Scalar>(p_r.dim(0)));
}

/// Masked single-term pair losses, averaged over the batch:
///   l_pair    = sum_mask -Y^E log P^E
///   l_teacher = sum_mask -Y^E log P-hat
///   l_distill = sum_mask -P-hat log P^E   (P-hat detached)
/// The teacher terms are empty handles when p_hat is.
template <typename Scalar>
LossTerms<Scalar> loss_pairs(const Tensor<Scalar>& p_e, const Tensor<Scalar>& p_hat, const Tensor<Scalar>& y_e,
                             const Tensor<Scalar>& mask) {
  LossTerms<Scalar> t;
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(p_e.dim(0));
  const auto target = mul(y_e, mask);
  t.l_pair = scale(cross_entropy(p_e, target), inv_b);
  if (p_hat) {
    t.l_teacher = scale(cross_entropy(p_hat, target), inv_b);
    t.l_distill = scale(cross_entropy(p_e, mul(p_hat.detach(), mask)), inv_b);
  }
  return t;
}

/// L = L_R + lambda (L_pair + L_teacher + L_distill); pair terms only with PS.
template <typename Scalar>
LossTerms<Scalar> total_loss(const ForwardArtifacts<Scalar>& a, const Batch<Scalar>& b, const ModelConfig& cfg) {
  LossTerms<Scalar> t;
  t.l_r = loss_route(a.p_r, b.y_r);
  t.total = t.l_r;
  if (cfg.use_ps && a.p_e) {
    auto pairs = loss_pairs(a.p_e, a.p_hat, b.y_e, b.mask);
    t.l_pair = pairs.l_pair;
    t.l_teacher = pairs.l_teacher;
    t.l_distill = pairs.l_distill;
    auto l_p = t.l_pair;
    if (t.l_teacher) l_p = add(add(l_p, t.l_teacher), t.l_distill);
    t.total = add(t.l_r, scale(l_p, static_cast<Scalar>(cfg.lambda)));
  }
  return t;
}

/// Closed-form loss at zero-initialized heads: uniform P^R and P^E = P-hat = 1/2.
double cold_start_loss(const Sample& s, const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Optimization

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 128;
  int epochs = 10;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  int eval_every = 1;  // epochs; 0 disables per-epoch evaluation
  bool verbose = false;
};

template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Tensor<Scalar>> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
      v_.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      if (!p.has_grad()) continue;
      auto g = p.grad();
      auto w = p.mutable_data();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
        w[i] -= static_cast<Scalar>(lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_));
      }
    }
  }

  long long steps() const { return t_; }

 private:
  std::vector<Tensor<Scalar>> params_;
  double lr_, beta1_, beta2_, eps_;
  std::vector<std::vector<double>> m_, v_;
  long long t_ = 0;
};

/// Rescales gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename Scalar>
double clip_grad_norm(std::span<Tensor<Scalar>> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (Scalar g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const auto f = static_cast<Scalar>(max_norm / norm);
    for (auto& p : params)
      for (auto& g : p.mutable_grad()) g *= f;
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Training loop

class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::string sample_id)
      : std::runtime_error(what), sample_id_(std::move(sample_id)) {}
  const std::string& sample_id() const { return sample_id_; }

 private:
  std::string sample_id_;
};

struct EvalReport;

struct EpochRecord {
  int epoch = 0;
  LossBreakdown loss;  // mean over the epoch's batches
  double cr_off = std::nan("");
  double top1_acc = std::nan("");
  double pair_auc = std::nan("");
};

/// Header of the per-epoch metrics CSV.
std::string metrics_header();
std::string metrics_row(const EpochRecord& r);

struct TrainResult {
  std::vector<EpochRecord> history;
};

/// Mini-batch training on normalized samples. `eval_set` (may be empty) is
/// evaluated every `eval_every` epochs. Rows are appended to `metrics` when
/// given. Throws NumericError on a non-finite loss.
TrainResult train(CcnModel<float>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& eval_set,
                  const TrainConfig& cfg, std::ostream* metrics = nullptr);

/// Mean loss over a sample set without updating anything (eval mode).
LossBreakdown mean_loss(CcnModel<float>& model, const std::vector<Sample>& samples, int batch_size = 256);

// ---------------------------------------------------------------------------
// Checkpoints

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ModelConfig config;
  NormStats norm;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
};

/// "CCN1" | u32 count | per tensor: u32 name length, name, u32 rank, u64 dims,
/// f32 payload | u32 config length, config JSON. Little-endian.
void save_checkpoint(const std::filesystem::path& path, const CcnModel<float>& model, const NormStats& norm);
/// Reads and fully validates a checkpoint; nothing is returned on error.
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Builds a model from a checkpoint, checking every tensor against the config.
CcnModel<float> load_model(const Checkpoint& ck);

/// NormStats rounded to f32 so stored and in-memory statistics agree.
NormStats round_to_float(const NormStats& s);

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

}  // namespace ccn

#endif  // CCN_TRAINING_HPP
