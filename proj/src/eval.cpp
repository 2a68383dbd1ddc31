#include "ccn/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace ccn {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0, pos = 0.0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end < n && scores[idx[end]] == scores[idx[start]]) ++end;
    const double mid_rank = 0.5 * static_cast<double>(start + 1 + end);  // mean of ranks start+1..end
    for (std::size_t k = start; k < end; ++k) {
      if (labels[idx[k]] != 0) {
        rank_sum += mid_rank;
        pos += 1.0;
      }
    }
    start = end;
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) return std::nan("");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

std::string report_header() {
  return "model,samples,seed,config_hash,cr_off,top1_acc,pair_auc,pair_auc_macro";
}

std::string report_row(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(8) << r.model << ',' << r.samples << ',' << r.seed << ',' << r.config_hash << ','
     << r.cr_off << ',' << r.top1_acc << ',' << r.pair_auc << ',' << r.pair_auc_macro;
  return os.str();
}

int argmax_first(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("argmax of empty vector");
  int best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  return best;
}

std::vector<Prediction> predict(CcnModel<float>& model, const std::vector<Sample>& samples, int batch_size) {
  std::vector<Prediction> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<const Sample*> ptrs;
    for (std::size_t k = start; k < std::min(samples.size(), start + static_cast<std::size_t>(batch_size)); ++k) {
      ptrs.push_back(&samples[k]);
    }
    const auto batch = make_batch<float>(std::span<const Sample* const>(ptrs));
    const auto art = model.forward(batch, Mode::Eval);
    for (Index b = 0; b < batch.size; ++b) {
      Prediction p;
      p.p_r = original_order(batch, art.p_r, b);
      if (art.p_e) {
        p.p_e = original_pairs(batch, art.p_e, b);
      } else {
        const Index n = batch.n;
        p.p_e = FeatureMatrix(n, n);
        for (Index i = 0; i < n; ++i)
          for (Index j = 0; j < n; ++j) {
            const double a = p.p_r[static_cast<std::size_t>(i)], c = p.p_r[static_cast<std::size_t>(j)];
            p.p_e(i, j) = (i == j || a + c <= 0.0) ? 0.5 : a / (a + c);
          }
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

EvalReport score_predictions(const std::vector<Sample>& samples, const std::vector<Prediction>& preds) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  if (samples.size() != preds.size()) throw std::invalid_argument("evaluate: prediction count mismatch");
  EvalReport r;
  r.samples = static_cast<int>(samples.size());
  std::vector<double> scores;
  std::vector<int> labels;
  double macro = 0.0, macro_n = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    const auto& p = preds[k];
    const int rec = argmax_first(p.p_r);
    r.cr_off += s.crs.at(static_cast<std::size_t>(rec));
    r.top1_acc += rec == s.l ? 1.0 : 0.0;
    const FeatureMatrix mask = pair_mask(s.n_routes(), s.l);
    std::vector<double> ss;
    std::vector<int> ll;
    for (Index i = 0; i < s.n_routes(); ++i)
      for (Index j = 0; j < s.n_routes(); ++j)
        if (mask(i, j) > 0.0) {
          ss.push_back(p.p_e(i, j));
          ll.push_back(s.y_e(i, j) > 0.5 ? 1 : 0);
        }
    const double a = auc(ss, ll);
    if (!std::isnan(a)) {
      macro += a;
      macro_n += 1.0;
    }
    scores.insert(scores.end(), ss.begin(), ss.end());
    labels.insert(labels.end(), ll.begin(), ll.end());
  }
  r.cr_off /= static_cast<double>(r.samples);
  r.top1_acc /= static_cast<double>(r.samples);
  r.pair_auc = auc(scores, labels);
  r.pair_auc_macro = macro_n > 0.0 ? macro / macro_n : std::nan("");
  return r;
}

EvalReport evaluate(CcnModel<float>& model, const std::vector<Sample>& samples, int batch_size) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  auto r = score_predictions(samples, predict(model, samples, batch_size));
  r.model = model.config().name();
  std::ostringstream h;
  h << std::hex << std::hash<std::string>{}(config_to_json(model.config()));
  r.config_hash = h.str();
  return r;
}

// ---------------------------------------------------------------------------
// Baselines

std::string baseline_name(Baseline b) {
  switch (b) {
    case Baseline::ShortestDistance:
      return "SD";
    case Baseline::ShortestTime:
      return "ST";
    case Baseline::Recall:
      return "Recall";
  }
  return "?";
}

namespace {

std::vector<double> baseline_scores(const Sample& s, Baseline b) {
  std::vector<double> v(static_cast<std::size_t>(s.n_routes()));
  for (Index i = 0; i < s.n_routes(); ++i) {
    double x = 0.0;
    switch (b) {
      case Baseline::ShortestDistance:
        x = -s.x_r(i, kLengthColumn);
        break;
      case Baseline::ShortestTime:
        x = -s.x_r(i, kEtaColumn);
        break;
      case Baseline::Recall:
        x = s.x_r(i, kRecallScoreColumn);
        break;
    }
    v[static_cast<std::size_t>(i)] = x;
  }
  return v;
}

}  // namespace

int baseline_pick(const Sample& s, Baseline b) { return argmax_first(baseline_scores(s, b)); }

EvalReport run_baseline(const std::vector<Sample>& samples, Baseline b) {
  std::vector<Prediction> preds;
  preds.reserve(samples.size());
  for (const auto& s : samples) {
    Prediction p;
    const auto sc = baseline_scores(s, b);
    const int pick = argmax_first(sc);
    const Index n = s.n_routes();
    p.p_r.assign(static_cast<std::size_t>(n), 0.0);
    p.p_r[static_cast<std::size_t>(pick)] = 1.0;
    p.p_e = FeatureMatrix(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        const double a = sc[static_cast<std::size_t>(i)], c = sc[static_cast<std::size_t>(j)];
        p.p_e(i, j) = a > c ? 1.0 : (a < c ? 0.0 : 0.5);
      }
    preds.push_back(std::move(p));
  }
  auto r = score_predictions(samples, preds);
  r.model = baseline_name(b);
  return r;
}

double oracle_cr(const std::vector<Sample>& samples) {
  double acc = 0.0;
  for (const auto& s : samples) acc += s.crs.at(static_cast<std::size_t>(s.l));
  return samples.empty() ? 0.0 : acc / static_cast<double>(samples.size());
}

// ---------------------------------------------------------------------------
// Explanations

std::string Explanation::render(const std::vector<std::string>& route_names) const {
  auto route = [&](int k) {
    return k < static_cast<int>(route_names.size()) ? route_names[static_cast<std::size_t>(k)]
                                                    : "route " + std::to_string(k);
  };
  std::ostringstream os;
  os << std::setprecision(6);
  os << route(i) << " vs " << route(j) << ": P = " << p_e << ", score = " << sum << '\n';
  for (int m : ranked) {
    const float v = scores[static_cast<std::size_t>(m)];
    os << "  " << std::left << std::setw(12) << fields[static_cast<std::size_t>(m)] << std::right << std::setw(12) << v;
    if (v > 0.0f) {
      os << "  favors " << route(i);
    } else if (v < 0.0f) {
      os << "  favors " << route(j);
    }
    os << '\n';
  }
  return os.str();
}

namespace {

Explanation explain_cell(const ForwardArtifacts<float>& a, const Batch<float>& b, const ModelConfig& cfg, int i,
                         int j) {
  const Index n = b.n, m = static_cast<Index>(cfg.fields.size());
  const auto& ord = b.order[0];
  Index ki = 0, kj = 0;
  for (Index k = 0; k < n; ++k) {
    if (ord[static_cast<std::size_t>(k)] == i) ki = k;
    if (ord[static_cast<std::size_t>(k)] == j) kj = k;
  }
  Explanation e;
  e.i = i;
  e.j = j;
  e.fields = cfg.fields.names;
  const auto& fs = a.field_scores.values();
  float acc = 0.0f;
  for (Index f = 0; f < m; ++f) {
    const float v = fs[static_cast<std::size_t>((ki * n + kj) * m + f)];
    e.scores.push_back(v);
    acc += v;
  }
  e.sum = acc;
  e.p_e = a.p_e.values()[static_cast<std::size_t>(ki * n + kj)];
  e.ranked.resize(static_cast<std::size_t>(m));
  std::iota(e.ranked.begin(), e.ranked.end(), 0);
  std::stable_sort(e.ranked.begin(), e.ranked.end(), [&e](int x, int y) {
    return std::fabs(e.scores[static_cast<std::size_t>(x)]) > std::fabs(e.scores[static_cast<std::size_t>(y)]);
  });
  return e;
}

}  // namespace

Explanation explain(CcnModel<float>& model, const Sample& normalized, int i, int j) {
  if (!model.config().use_ps) throw UnsupportedOperation("explain: model has no pair scoring network");
  const int n = static_cast<int>(normalized.n_routes());
  if (i < 0 || j < 0 || i >= n || j >= n) throw std::out_of_range("explain: pair index out of range");
  const auto batch = make_batch<float>(normalized);
  const auto art = model.forward(batch, Mode::Eval);
  return explain_cell(art, batch, model.config(), i, j);
}

std::vector<Explanation> explain_recommendation(CcnModel<float>& model, const Sample& normalized, int* recommended) {
  if (!model.config().use_ps) throw UnsupportedOperation("explain: model has no pair scoring network");
  const auto batch = make_batch<float>(normalized);
  const auto art = model.forward(batch, Mode::Eval);
  const int rec = argmax_first(original_order(batch, art.p_r, 0));
  if (recommended) *recommended = rec;
  std::vector<Explanation> out;
  for (int j = 0; j < static_cast<int>(batch.n); ++j)
    if (j != rec) out.push_back(explain_cell(art, batch, model.config(), rec, j));
  return out;
}

// ---------------------------------------------------------------------------
// Ablation

std::vector<AblationVariant> default_ablation_grid() {
  return {
      {"pointwise", false, false, false, false},  {"self_attention", true, false, false, false},
      {"ccn_no_xc", false, true, true, true},     {"ccn", true, true, true, true},
      {"ccn_plain_ps", true, true, true, false},  {"ccn_unconstrained", true, true, false, false},
  };
}

std::pair<double, double> mean_std(std::span<const double> v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(v.size() - 1))};
}

std::vector<AblationRow> run_ablation(const std::vector<Sample>& train_set, const std::vector<Sample>& test_set,
                                      const std::vector<AblationVariant>& grid, const AblationSetup& setup,
                                      const std::function<void(const std::string&)>& progress) {
  if (setup.seeds.empty()) throw std::invalid_argument("run_ablation: no seeds");
  std::vector<AblationRow> rows;
  for (const auto& v : grid) {
    ModelConfig cfg = setup.base;
    cfg.use_xc = v.use_xc;
    cfg.use_cco = v.use_cco;
    cfg.use_ps = v.use_ps;
    cfg.distill = v.distill;
    cfg.validate();
    AblationRow row;
    row.variant = v;
    row.seeds = setup.seeds;
    const auto t0 = std::chrono::steady_clock::now();
    for (auto seed : setup.seeds) {
      TrainConfig tc = setup.train;
      tc.seed = seed;
      tc.eval_every = 0;
      const auto r0 = std::chrono::steady_clock::now();
      CcnModel<float> model(cfg, seed);
      train(model, train_set, {}, tc);
      auto rep = evaluate(model, test_set);
      rep.model = v.name;
      rep.seed = seed;
      row.runs.push_back(rep);
      if (progress) {
        std::ostringstream os;
        os << std::setprecision(5) << v.name << " seed " << seed << ": cr_off " << rep.cr_off << " top1 "
           << rep.top1_acc << " pair_auc " << rep.pair_auc << " ("
           << std::chrono::duration<double>(std::chrono::steady_clock::now() - r0).count() << " s)";
        progress(os.str());
      }
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::vector<double> cr, t1, au;
    for (const auto& r : row.runs) {
      cr.push_back(r.cr_off);
      t1.push_back(r.top1_acc);
      au.push_back(r.pair_auc);
    }
    std::tie(row.cr_mean, row.cr_std) = mean_std(cr);
    std::tie(row.top1_mean, row.top1_std) = mean_std(t1);
    std::tie(row.auc_mean, row.auc_std) = mean_std(au);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(8);
  os << "model,use_xc,use_cco,use_ps,distill,seeds,cr_off_mean,cr_off_std,top1_acc_mean,top1_acc_std,"
        "pair_auc_mean,pair_auc_std,seconds\n";
  for (const auto& r : rows) {
    std::string seeds;
    for (std::size_t k = 0; k < r.seeds.size(); ++k) seeds += (k ? ";" : "") + std::to_string(r.seeds[k]);
    os << r.variant.name << ',' << r.variant.use_xc << ',' << r.variant.use_cco << ',' << r.variant.use_ps << ','
       << r.variant.distill << ',' << seeds << ',' << r.cr_mean << ',' << r.cr_std << ',' << r.top1_mean << ','
       << r.top1_std << ',' << r.auc_mean << ',' << r.auc_std << ',' << r.seconds << '\n';
  }
  return os.str();
}

}  // namespace ccn
