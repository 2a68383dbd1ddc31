// Command-line front end: dataset generation, training, evaluation,
// ablation, explanations and diagnostics.

#include "ccn/config.hpp"
#include "ccn/dataset.hpp"
#include "ccn/diagnostics.hpp"
#include "ccn/eval.hpp"
#include "ccn/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ccn;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string dataset;
  std::string checkpoint;
  std::string sample_id;
  std::vector<int> pair;
  std::string split = "test";
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig config_of(const Options& o) {
  RunConfig rc = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) rc.train.seed = *o.seed;
  return rc;
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError(flag + " is required");
}

void normalize_all(std::vector<Sample>& samples, const NormStats& norm) {
  for (auto& s : samples) s = apply_normalize(s, norm);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

int cmd_gen_data(const Options& o) {
  require(o.out, "--out");
  const RunConfig rc = config_of(o);
  const Dataset ds = generate_dataset(rc.dataset, o.seed.value_or(1));
  write_dataset(o.out, ds);
  std::cout << dataset_stats(ds.samples, ds.discarded).to_text();
  return kOk;
}

int cmd_train(const Options& o) {
  require(o.dataset, "--dataset");
  require(o.out, "--out");
  const RunConfig rc = config_of(o);
  const auto all = read_samples(o.dataset);
  auto train_set = select_split(all, "train");
  auto test_set = select_split(all, "test");
  if (train_set.empty()) throw DataError(o.dataset + ": no training samples");
  const NormStats norm = round_to_float(fit_normalize(train_set));
  normalize_all(train_set, norm);
  normalize_all(test_set, norm);

  const ModelConfig mc = model_for_layout(rc, read_layout(o.dataset));
  CcnModel<float> model(mc, rc.train.seed);
  auto metrics = open_out(fs::path(o.out).string() + ".metrics.csv");
  train(model, train_set, test_set, rc.train, &metrics);
  save_checkpoint(o.out, model, norm);
  if (!test_set.empty()) {
    EvalReport r = evaluate(model, test_set);
    r.seed = rc.train.seed;
    std::cout << report_header() << '\n' << report_row(r) << '\n';
  }
  return kOk;
}

int cmd_eval(const Options& o) {
  require(o.checkpoint, "--checkpoint");
  require(o.dataset, "--dataset");
  const Checkpoint ck = read_checkpoint(o.checkpoint);
  auto model = load_model(ck);
  auto samples = select_split(read_samples(o.dataset), o.split);
  if (samples.empty()) throw DataError(o.dataset + ": no samples in split '" + o.split + "'");
  std::vector<EvalReport> rows;
  for (auto b : {Baseline::ShortestDistance, Baseline::ShortestTime, Baseline::Recall})
    rows.push_back(run_baseline(samples, b));
  normalize_all(samples, ck.norm);
  EvalReport r = evaluate(model, samples);
  if (o.seed) r.seed = *o.seed;
  rows.insert(rows.begin(), r);

  std::ostringstream csv;
  csv << report_header() << '\n';
  for (const auto& row : rows) csv << report_row(row) << '\n';
  std::cout << csv.str();
  if (!o.out.empty()) open_out(o.out) << csv.str();
  return kOk;
}

int cmd_ablate(const Options& o) {
  require(o.dataset, "--dataset");
  const RunConfig rc = config_of(o);
  const auto all = read_samples(o.dataset);
  auto train_set = select_split(all, "train");
  auto test_set = select_split(all, "test");
  if (train_set.empty() || test_set.empty()) throw DataError(o.dataset + ": need both train and test samples");
  const NormStats norm = round_to_float(fit_normalize(train_set));
  normalize_all(train_set, norm);
  normalize_all(test_set, norm);

  AblationSetup setup;
  setup.base = model_for_layout(rc, read_layout(o.dataset));
  setup.train = rc.train;
  setup.seeds = o.seed ? std::vector<std::uint64_t>{*o.seed} : rc.seeds;
  const auto rows = run_ablation(train_set, test_set, default_ablation_grid(), setup,
                                 [](const std::string& line) { std::cerr << line << '\n'; });
  const std::string csv = ablation_csv(rows);
  std::cout << csv;
  if (!o.out.empty()) open_out(o.out) << csv;
  return kOk;
}

int cmd_explain(const Options& o) {
  require(o.checkpoint, "--checkpoint");
  require(o.dataset, "--dataset");
  require(o.sample_id, "--sample-id");
  const Checkpoint ck = read_checkpoint(o.checkpoint);
  auto model = load_model(ck);
  const auto samples = read_samples(o.dataset);
  const auto it = std::find_if(samples.begin(), samples.end(),
                               [&](const Sample& s) { return s.sample_id == o.sample_id; });
  if (it == samples.end()) throw DataError("no sample with id " + o.sample_id);
  const Sample s = apply_normalize(*it, ck.norm);
  const int n = static_cast<int>(s.n_routes());

  if (!o.pair.empty()) {
    const int i = o.pair[0], j = o.pair[1];
    if (i < 0 || j < 0 || i >= n || j >= n) {
      throw UsageError("--pair indices must be in [0, " + std::to_string(n) + ")");
    }
    std::cout << explain(model, s, i, j).render();
    return kOk;
  }
  int rec = 0;
  const auto all = explain_recommendation(model, s, &rec);
  std::cout << o.sample_id << ": recommended route " << rec << " (CR " << it->crs[static_cast<std::size_t>(rec)]
            << ", chosen route " << it->l << ")\n";
  for (const auto& e : all) std::cout << e.render();
  return kOk;
}

int cmd_grad_check(const Options& o) {
  const std::uint64_t seed = o.seed.value_or(1);
  auto checks = primitive_grad_checks(seed);
  auto model_checks = model_grad_checks(seed);
  checks.insert(checks.end(), model_checks.begin(), model_checks.end());
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.report.passed();
    std::cout << (c.report.passed() ? "PASS " : "FAIL ") << std::left << std::setw(28) << c.name
              << " max_rel_err " << std::scientific << std::setprecision(3) << c.report.max_rel_error
              << std::defaultfloat << '\n';
  }
  return ok ? kOk : kNumeric;
}

int cmd_param_count(const Options& o) {
  const RunConfig rc = config_of(o);
  ModelConfig mc;
  if (rc.has_feature_override) {
    mc = model_from_features(rc);
  } else {
    mc = model_for_layout(rc, o.dataset.empty() ? FeatureLayout::standard() : read_layout(o.dataset));
  }
  const ParamCount pc = param_count(mc);
  std::cout << "model: " << mc.name() << '\n'
            << "comparison_width: " << mc.comparison_layout().width() << '\n'
            << "exact_params: " << pc.exact << '\n'
            << "approx_params: " << pc.approx << '\n'
            << "exact_over_approx: " << pc.ratio << '\n'
            << "approx_f32_mb: " << pc.approx_f32_bytes / 1e6 << '\n'
            << "exact_f32_mb: " << pc.exact_f32_bytes / 1e6 << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Route recommendation with candidate comparison networks"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Config file (INI sections)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Seed override");
    sub->add_option("--out", o.out, "Output path");
  };
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset (JSONL)");
  add_common(gen);
  auto* trn = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_common(trn);
  trn->add_option("--dataset", o.dataset, "Dataset JSONL");
  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint against the baselines");
  add_common(evl);
  evl->add_option("--dataset", o.dataset, "Dataset JSONL");
  evl->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  evl->add_option("--split", o.split, "Split to evaluate (train, test or all)");
  auto* abl = app.add_subcommand("ablate", "Train the ablation grid over several seeds");
  add_common(abl);
  abl->add_option("--dataset", o.dataset, "Dataset JSONL");
  auto* exp = app.add_subcommand("explain", "Per-field explanation of a pair or the recommendation");
  add_common(exp);
  exp->add_option("--dataset", o.dataset, "Dataset JSONL");
  exp->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  exp->add_option("--sample-id", o.sample_id, "Sample id");
  exp->add_option("--pair", o.pair, "Candidate indices I J")->expected(2);
  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  add_common(gc);
  auto* pc = app.add_subcommand("param-count", "Exact and approximate parameter counts");
  add_common(pc);
  pc->add_option("--dataset", o.dataset, "Dataset JSONL (for its feature layout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e, std::cerr, std::cerr);
    return kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (name == "gen-data") return cmd_gen_data(o);
    if (name == "train") return cmd_train(o);
    if (name == "eval") return cmd_eval(o);
    if (name == "ablate") return cmd_ablate(o);
    if (name == "explain") return cmd_explain(o);
    if (name == "grad-check") return cmd_grad_check(o);
    if (name == "param-count") return cmd_param_count(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << sub->help();
    return kUsage;
  } catch (const UnsupportedOperation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << " (sample " << e.sample_id() << ")\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
