#include "ccn/training.hpp"

#include "ccn/eval.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace ccn {

double cold_start_loss(const Sample& s, const ModelConfig& cfg) {
  const double n = static_cast<double>(s.n_routes());
  double total = std::log(n);
  if (!cfg.use_ps) return total;
  const FeatureMatrix mask = pair_mask(s.n_routes(), s.l);
  const double positives = (s.y_e.array() * mask.array()).sum();
  double l_p = positives * std::log(2.0);
  if (cfg.distill) l_p += positives * std::log(2.0) + 0.5 * mask.sum() * std::log(2.0);
  return total + cfg.lambda * l_p;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

std::vector<std::vector<const Sample*>> make_batches(const std::vector<Sample>& samples, int batch_size,
                                                     std::mt19937_64* shuffle) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (shuffle) std::shuffle(idx.begin(), idx.end(), *shuffle);
  std::vector<std::vector<const Sample*>> out;
  for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<const Sample*> b;
    for (std::size_t k = start; k < std::min(idx.size(), start + static_cast<std::size_t>(batch_size)); ++k) {
      b.push_back(&samples[idx[k]]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

// Returns the id of the first sample whose outputs are non-finite, or the
// first id of the batch when the fault cannot be localized.
std::string offending_sample(const ForwardArtifacts<float>& a, const Batch<float>& b) {
  const Index n = b.n;
  for (Index k = 0; k < b.size; ++k) {
    bool bad = false;
    for (Index i = 0; i < n; ++i) bad |= !std::isfinite(a.p_r.values()[static_cast<std::size_t>(k * n + i)]);
    if (a.p_e) {
      for (Index c = 0; c < n * n; ++c) bad |= !std::isfinite(a.p_e.values()[static_cast<std::size_t>(k * n * n + c)]);
    }
    if (a.p_hat) {
      for (Index c = 0; c < n * n; ++c)
        bad |= !std::isfinite(a.p_hat.values()[static_cast<std::size_t>(k * n * n + c)]);
    }
    if (bad) return b.ids[static_cast<std::size_t>(k)];
  }
  return b.ids.front();
}

const Sample* non_finite_input(const std::vector<const Sample*>& batch) {
  for (const Sample* s : batch) {
    const bool ok = s->x_r.allFinite() && s->x_u.allFinite() && s->x_s.allFinite() &&
                    std::all_of(s->x_c.values.begin(), s->x_c.values.end(), [](double v) { return std::isfinite(v); }) &&
                    std::all_of(s->history.begin(), s->history.end(),
                                [](const HistoryRecord& h) { return h.route.allFinite(); });
    if (!ok) return s;
  }
  return nullptr;
}

void accumulate(LossBreakdown& acc, const LossBreakdown& x, double w) {
  acc.l_r += w * x.l_r;
  acc.l_pair += w * x.l_pair;
  acc.l_teacher += w * x.l_teacher;
  acc.l_distill += w * x.l_distill;
  acc.l_p += w * x.l_p;
  acc.total += w * x.total;
}

}  // namespace

std::string metrics_header() { return "epoch,l_r,l_pair,l_teacher,l_distill,total,cr_off,top1_acc,pair_auc"; }

std::string metrics_row(const EpochRecord& r) {
  std::ostringstream os;
  os << std::setprecision(8) << r.epoch << ',' << r.loss.l_r << ',' << r.loss.l_pair << ',' << r.loss.l_teacher << ','
     << r.loss.l_distill << ',' << r.loss.total << ',' << r.cr_off << ',' << r.top1_acc << ',' << r.pair_auc;
  return os.str();
}

TrainResult train(CcnModel<float>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& eval_set,
                  const TrainConfig& cfg, std::ostream* metrics) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (cfg.batch_size < 1 || !(cfg.lr > 0.0)) throw std::invalid_argument("train: need batch_size >= 1 and lr > 0");
  auto params = model.params().trainable();
  Adam<float> opt(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  TrainResult result;
  if (metrics) *metrics << metrics_header() << '\n';
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto rng = world::derived_rng(cfg.seed, 200, static_cast<std::uint64_t>(epoch));
    const auto batches = make_batches(train_set, cfg.batch_size, &rng);
    EpochRecord rec;
    rec.epoch = epoch;
    for (const auto& ptrs : batches) {
      if (const Sample* bad = non_finite_input(ptrs)) {
        throw NumericError("non-finite input features at epoch " + std::to_string(epoch) + " (sample " +
                               bad->sample_id + ")",
                           bad->sample_id);
      }
      const auto batch = make_batch<float>(std::span<const Sample* const>(ptrs));
      const auto art = model.forward(batch, Mode::Train);
      const auto loss = total_loss(art, batch, model.config());
      const auto values = loss.values();
      if (!std::isfinite(values.total)) {
        const auto id = offending_sample(art, batch);
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " (sample " + id + ")", id);
      }
      model.params().zero_grad();
      backward(loss.total);
      const double norm = clip_grad_norm(std::span<Tensor<float>>(params), cfg.clip_norm);
      if (!std::isfinite(norm)) {
        throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + " (sample " + batch.ids.front() +
                               ")",
                           batch.ids.front());
      }
      opt.step();
      accumulate(rec.loss, values, static_cast<double>(ptrs.size()) / static_cast<double>(train_set.size()));
    }
    if (cfg.eval_every > 0 && !eval_set.empty() && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      const auto rep = evaluate(model, eval_set);
      rec.cr_off = rep.cr_off;
      rec.top1_acc = rep.top1_acc;
      rec.pair_auc = rep.pair_auc;
    }
    if (metrics) *metrics << metrics_row(rec) << '\n' << std::flush;
    if (cfg.verbose) std::clog << metrics_row(rec) << '\n';
    result.history.push_back(rec);
  }
  return result;
}

LossBreakdown mean_loss(CcnModel<float>& model, const std::vector<Sample>& samples, int batch_size) {
  LossBreakdown acc;
  for (const auto& ptrs : make_batches(samples, batch_size, nullptr)) {
    const auto batch = make_batch<float>(std::span<const Sample* const>(ptrs));
    const auto art = model.forward(batch, Mode::Eval);
    accumulate(acc, total_loss(art, batch, model.config()).values(),
               static_cast<double>(ptrs.size()) / static_cast<double>(samples.size()));
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'C', 'C', 'N', '1'};
constexpr std::uint32_t kMaxName = 1u << 12;
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + k])) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + k])) << (8 * k);
    pos_ += 8;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

void put_tensor(std::string& out, const std::string& name, const Shape& shape, std::span<const float> data) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (Index d : shape) put_u64(out, static_cast<std::uint64_t>(d));
  for (float f : data) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::vector<float> to_float(const FeatureRow& r) {
  std::vector<float> v(static_cast<std::size_t>(r.size()));
  for (Index c = 0; c < r.size(); ++c) v[static_cast<std::size_t>(c)] = static_cast<float>(r[c]);
  return v;
}

FeatureRow from_float(const Tensor<float>& t) {
  FeatureRow r(t.size());
  for (Index c = 0; c < t.size(); ++c) r[c] = static_cast<double>(t.values()[static_cast<std::size_t>(c)]);
  return r;
}

const std::vector<std::pair<std::string, FeatureRow NormStats::*>>& norm_fields() {
  static const std::vector<std::pair<std::string, FeatureRow NormStats::*>> f{
      {"norm.route_mean", &NormStats::route_mean}, {"norm.route_std", &NormStats::route_std},
      {"norm.pair_mean", &NormStats::pair_mean},   {"norm.pair_std", &NormStats::pair_std},
      {"norm.user_mean", &NormStats::user_mean},   {"norm.user_std", &NormStats::user_std}};
  return f;
}

}  // namespace

NormStats round_to_float(const NormStats& s) {
  NormStats r = s;
  for (const auto& [name, member] : norm_fields()) {
    (r.*member) = (s.*member).unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
  }
  return r;
}

std::string config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["n_routes"] = c.n_routes;
  j["k_blocks"] = c.k_blocks;
  j["banks"] = c.banks;
  j["widths"] = c.widths;
  j["lambda"] = c.lambda;
  j["use_xc"] = c.use_xc;
  j["use_cco"] = c.use_cco;
  j["use_ps"] = c.use_ps;
  j["distill"] = c.distill;
  j["route_width"] = c.route_width;
  j["pair_width"] = c.pair_width;
  j["user_width"] = c.user_width;
  j["scenario_width"] = c.scenario_width;
  j["fields"] = {{"names", c.fields.names}, {"route_cols", c.fields.route_cols}, {"pair_cols", c.fields.pair_cols}};
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig c;
    c.n_routes = j.at("n_routes").get<int>();
    c.k_blocks = j.at("k_blocks").get<int>();
    c.banks = j.at("banks").get<int>();
    c.widths = j.at("widths").get<std::array<int, 4>>();
    c.lambda = j.at("lambda").get<double>();
    c.use_xc = j.at("use_xc").get<bool>();
    c.use_cco = j.at("use_cco").get<bool>();
    c.use_ps = j.at("use_ps").get<bool>();
    c.distill = j.at("distill").get<bool>();
    c.route_width = j.at("route_width").get<Index>();
    c.pair_width = j.at("pair_width").get<Index>();
    c.user_width = j.at("user_width").get<Index>();
    c.scenario_width = j.at("scenario_width").get<Index>();
    const auto& f = j.at("fields");
    c.fields.names = f.at("names").get<std::vector<std::string>>();
    c.fields.route_cols = f.at("route_cols").get<std::vector<std::vector<Index>>>();
    c.fields.pair_cols = f.at("pair_cols").get<std::vector<std::vector<Index>>>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint config block: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint config block: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const CcnModel<float>& model, const NormStats& norm) {
  if (!norm.fitted) throw std::logic_error("save_checkpoint: normalization stats not fitted");
  std::string out(kMagic, 4);
  const auto& entries = model.params().entries();
  put_u32(out, static_cast<std::uint32_t>(entries.size() + norm_fields().size()));
  for (const auto& e : entries) put_tensor(out, e.name, e.tensor.shape(), e.tensor.data());
  for (const auto& [name, member] : norm_fields()) {
    const auto v = to_float(norm.*member);
    put_tensor(out, name, {static_cast<Index>(v.size())}, v);
  }
  const auto cfg = config_to_json(model.config());
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(data));
  if (r.remaining() < 4 || r.bytes(4) != std::string(kMagic, 4)) {
    throw CheckpointError("not a CCN1 checkpoint (bad magic): " + path.string());
  }
  Checkpoint ck;
  const std::uint32_t count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t len = r.u32();
    if (len == 0 || len > kMaxName) throw CheckpointError("bad tensor name length");
    auto name = r.bytes(len);
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > kMaxRank) throw CheckpointError("bad rank for tensor " + name);
    Shape shape;
    std::uint64_t total = 1;
    for (std::uint32_t a = 0; a < rank; ++a) {
      const std::uint64_t d = r.u64();
      if (d == 0 || d > r.remaining()) throw CheckpointError("bad dimension for tensor " + name);
      total *= d;
      if (total * 4 > r.remaining()) throw CheckpointError("checkpoint truncated in tensor " + name);
      shape.push_back(static_cast<Index>(d));
    }
    std::vector<float> v(static_cast<std::size_t>(total));
    r.need(v.size() * 4);
    for (auto& x : v) x = std::bit_cast<float>(r.u32());
    ck.tensors.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(v)));
  }
  const std::uint32_t cfg_len = r.u32();
  ck.config = config_from_json(r.bytes(cfg_len));
  if (r.remaining() != 0) throw CheckpointError("trailing bytes after checkpoint config block");

  for (const auto& [name, member] : norm_fields()) {
    auto it = std::find_if(ck.tensors.begin(), ck.tensors.end(), [&](const auto& p) { return p.first == name; });
    if (it == ck.tensors.end()) throw CheckpointError("checkpoint lacks " + name);
    ck.norm.*member = from_float(it->second);
  }
  ck.norm.fitted = true;
  const auto& c = ck.config;
  if (ck.norm.route_mean.size() != c.route_width || ck.norm.route_std.size() != c.route_width ||
      ck.norm.pair_mean.size() != c.pair_width || ck.norm.pair_std.size() != c.pair_width ||
      ck.norm.user_mean.size() != c.user_width || ck.norm.user_std.size() != c.user_width) {
    throw CheckpointError("normalization stats do not match the config widths");
  }
  std::erase_if(ck.tensors, [](const auto& p) { return p.first.rfind("norm.", 0) == 0; });
  return ck;
}

CcnModel<float> load_model(const Checkpoint& ck) {
  CcnModel<float> model(ck.config, 0);
  const auto& entries = model.params().entries();
  if (entries.size() != ck.tensors.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(ck.tensors.size()) + " tensors, config expects " +
                          std::to_string(entries.size()));
  }
  for (const auto& [name, t] : ck.tensors) {
    if (!model.params().contains(name)) throw CheckpointError("unexpected tensor " + name);
    if (model.params().get(name).shape() != t.shape()) {
      throw CheckpointError("shape mismatch for " + name + ": file " + to_string(t.shape()) + ", config " +
                            to_string(model.params().get(name).shape()));
    }
  }
  for (const auto& [name, t] : ck.tensors) {
    auto dst = model.params().get(name);
    std::copy(t.data().begin(), t.data().end(), dst.mutable_data().begin());
  }
  return model;
}

}  // namespace ccn
