// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero when any selected criterion fails.
//
//   d2v_acceptance            run criteria 1-7
//   d2v_acceptance 5 6        run the listed criteria only

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "checks.h"
#include "d2v/cli/checkpoint.h"
#include "d2v/data/corpus_io.h"
#include "d2v/data/labels.h"
#include "d2v/error.h"
#include "d2v/eval/experiment.h"
#include "d2v/eval/metrics.h"
#include "d2v/syn/generator.h"

namespace d2v::acceptance {
namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Accumulates named checks into one outcome.
class Verdict {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  Outcome outcome() const {
    Outcome o;
    o.pass = failures_.empty();
    std::string d;
    for (const auto& n : notes_) d += (d.empty() ? "" : "; ") + n;
    for (const auto& f : failures_) d += (d.empty() ? "failed: " : "; failed: ") + f;
    o.detail = d;
    return o;
  }

 private:
  std::vector<std::string> notes_, failures_;
};

std::string num(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Gradient integrity.

Outcome gradient_integrity() {
  Verdict v;
  const auto full = testing::check_doctor2vec_gradient(1);
  v.note("full model max rel err " + num(full.max_rel_error, 3) + " over " + std::to_string(full.entries_checked) +
         " entries");
  v.check(full.max_rel_error < 1e-5, "full model error >= 1e-5 at " + full.worst_param);
  double worst = 0.0;
  std::string worst_op;
  for (const auto& op : testing::primitive_names())
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const auto r = testing::check_primitive(op, seed);
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        worst_op = op + " seed " + std::to_string(seed);
      }
    }
  v.note(std::to_string(testing::primitive_names().size()) + " primitives x 100 seeds max rel err " + num(worst, 3));
  v.check(worst < 1e-6, "primitive error >= 1e-6 (" + worst_op + ")");
  return v.outcome();
}

// ---------------------------------------------------------------------------
// 2. Memory-network invariants.

Outcome memory_invariants() {
  Verdict v;
  double sum_err = 0.0, bound = 0.0, perm = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed)
    for (bool identity : {false, true}) {
      const auto r = testing::check_memory_invariants(seed, identity);
      sum_err = std::max(sum_err, r.attention_sum_error);
      bound = std::max(bound, r.bound_violation);
    }
  for (std::uint64_t seed = 0; seed < 100; ++seed) perm = std::max(perm, testing::memory_permutation_error(seed));
  const bool flips = testing::memory_argmax_flips();
  v.note("attention sum err " + num(sum_err, 3) + ", bound violation " + num(bound, 3) + ", permutation err " +
         num(perm, 3) + ", argmax flips " + (flips ? "yes" : "no"));
  v.check(sum_err <= 1e-12, "attention sums");
  v.check(bound <= 1e-12, "Doc_emb bounds");
  v.check(perm <= 1e-10, "permutation invariance");
  v.check(flips, "dynamic representation");
  return v.outcome();
}

// ---------------------------------------------------------------------------
// 3. Metric oracles.

Outcome metric_oracles() {
  Verdict v;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size_d(2, 20), grid_d(0, 9), coin(0, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double pr_err = 0.0;
  int instruments = 0;
  while (instruments < 1000) {
    const int n = size_d(rng);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    // Half the instruments use a coarse grid so that tied scores occur.
    const bool coarse = coin(rng);
    for (int i = 0; i < n; ++i) {
      scores[i] = coarse ? grid_d(rng) / 10.0 : unit(rng);
      labels[i] = coin(rng);
    }
    if (std::count(labels.begin(), labels.end(), 1) == 0 || std::count(labels.begin(), labels.end(), 0) == 0) continue;
    ++instruments;
    pr_err = std::max(pr_err, std::abs(eval::pr_auc(scores, labels) - testing::brute_force_pr_auc(scores, labels)));
  }
  v.note("pr_auc vs exhaustive enumeration max err " + num(pr_err, 3) + " on 1000 instruments");
  v.check(pr_err <= 1e-12, "pr_auc oracle");

  double r2_err = 0.0, mse_err = 0.0;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const int n = size_d(rng);
    std::vector<double> pred(n), act(n);
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-3.0, 3.0)(rng));
    for (int i = 0; i < n; ++i) {
      act[i] = scale * normal(rng);
      pred[i] = act[i] + scale * 0.5 * normal(rng);
    }
    const double r2 = eval::r2_score(pred, act), r2_ref = testing::two_pass_r2(pred, act);
    const double mse = eval::mean_squared_error(pred, act), mse_ref = testing::two_pass_mse(pred, act);
    r2_err = std::max(r2_err, std::abs(r2 - r2_ref) / std::max(1.0, std::abs(r2_ref)));
    mse_err = std::max(mse_err, std::abs(mse - mse_ref) / std::max(1e-300, std::abs(mse_ref)));
  }
  v.note("r2 rel err " + num(r2_err, 3) + ", mse rel err " + num(mse_err, 3));
  v.check(r2_err <= 1e-12, "r2 oracle");
  v.check(mse_err <= 1e-12, "mse oracle");

  // Strictly increasing maps of scores on a 0.05 grid keep every order and tie.
  double mono_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = size_d(rng) + 10;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = std::uniform_int_distribution<int>(0, 20)(rng) * 0.05;
      labels[i] = i % 2 == 0 ? 1 : coin(rng);
    }
    labels[1] = 0;
    const double a = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    const double b = std::uniform_real_distribution<double>(-5.0, 5.0)(rng);
    const double k = std::uniform_real_distribution<double>(0.5, 4.0)(rng);
    std::vector<double> mapped(n);
    for (int i = 0; i < n; ++i) {
      switch (t % 3) {
        case 0: mapped[i] = a * scores[i] + b; break;
        case 1: mapped[i] = std::exp(k * scores[i]) + b; break;
        default: mapped[i] = 1.0 / (1.0 + std::exp(-k * (scores[i] - 0.5))); break;
      }
    }
    mono_err = std::max(mono_err, std::abs(eval::pr_auc(scores, labels) - eval::pr_auc(mapped, labels)));
  }
  v.note("monotone-map invariance max err " + num(mono_err, 3) + " over 100 maps");
  v.check(mono_err <= 1e-12, "monotone invariance");
  return v.outcome();
}

// ---------------------------------------------------------------------------
// 4. Label pipeline.

int reference_bin(double x) {
  // Closed-open intervals [0,.2) [.2,.4) [.4,.6) [.6,.8) [.8,1].
  static constexpr double lo[] = {0.0, 0.2, 0.4, 0.6, 0.8};
  for (int b = 4; b >= 0; --b)
    if (x >= lo[b]) return b;
  return -1;
}

Outcome label_pipeline() {
  Verdict v;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> n_d(1, 60), rand_d(0, 40);
  std::uniform_real_distribution<double> window_d(0.25, 24.0);
  int range_bad = 0, extreme_bad = 0, bin_bad = 0;
  for (int t = 0; t < 1000; ++t) {
    data::Trial trial;
    trial.id = "T" + std::to_string(t);
    const int n = n_d(rng);
    for (int i = 0; i < n; ++i) {
      const int r = rand_d(rng);
      const int d = std::uniform_int_distribution<int>(0, r)(rng);
      // Some trials share one window so that equal rates occur.
      const double w = t % 4 == 0 ? 1.0 : window_d(rng);
      trial.enrollments.push_back({"D" + std::to_string(i), r, d, w});
    }
    const auto labels = data::label_trial(trial);
    double lo = 1.0, hi = 0.0;
    std::set<double> raw;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto& l = labels[i];
      const auto& e = trial.enrollments[i];
      raw.insert(static_cast<double>(e.randomized - e.discontinued) / e.window);
      range_bad += !(l.normalized_rate >= 0.0 && l.normalized_rate <= 1.0);
      bin_bad += l.bin != reference_bin(l.normalized_rate);
      lo = std::min(lo, l.normalized_rate);
      hi = std::max(hi, l.normalized_rate);
    }
    if (raw.size() > 1) extreme_bad += !(lo == 0.0 && hi == 1.0);
  }
  v.note("1000 random trials: " + std::to_string(range_bad) + " out of range, " + std::to_string(extreme_bad) +
         " without attained min/max, " + std::to_string(bin_bad) + " inconsistent bins");
  v.check(range_bad == 0, "normalized range");
  v.check(extreme_bad == 0, "min/max attained");
  v.check(bin_bad == 0, "bin boundaries");
  v.check(data::bin_rate(0.2) == 1 && data::bin_rate(0.8) == 4 && data::bin_rate(1.0) == 4 && data::bin_rate(0.0) == 0,
          "boundary values");

  const syn::GenConfig cfg;
  const auto g = syn::generate(cfg);
  const auto dist = syn::bin_distribution(g.corpus);
  double worst = 0.0;
  std::string shares;
  for (int b = 0; b < data::kNumBins; ++b) {
    worst = std::max(worst, std::abs(dist[b] - cfg.target_bin_distribution[b]));
    shares += (b ? "/" : "") + num(100.0 * dist[b], 3);
  }
  v.note("generated bin shares " + shares + " % (target 12/33/37/12/6, max deviation " + num(100 * worst, 3) +
         " points)");
  v.check(worst <= 0.05, "generator bin distribution");
  return v.outcome();
}

// ---------------------------------------------------------------------------
// 5. Planted-signal learning.

constexpr int kPlantedEpochs = 60;

Outcome planted_signal() {
  Verdict v;
  const auto corpus = syn::generate_corpus(syn::GenConfig{});
  v.note(std::to_string(corpus.doctors.size()) + " doctors, " + std::to_string(corpus.trials.size()) + " trials, " +
         std::to_string(corpus.samples.size()) + " samples");
  eval::ExperimentSpec spec;
  spec.seeds = {1, 2, 3};
  spec.train.max_epochs = kPlantedEpochs;

  std::map<std::string, eval::ExperimentResult> results;
  for (const std::string kind : {"doctor2vec", "median", "deepmatch"}) {
    spec.model.kind = kind;
    const auto t0 = std::chrono::steady_clock::now();
    results[kind] = eval::run_experiment(corpus, spec);
    std::cerr << "  " << kind << ": mean PR-AUC " << num(results[kind].mean.pr_auc) << " (" << num(elapsed(t0), 3)
              << " s)\n";
  }
  const double d2v = results["doctor2vec"].mean.pr_auc;
  const double median = results["median"].mean.pr_auc;
  const double deepmatch = results["deepmatch"].mean.pr_auc;
  v.note("PR-AUC doctor2vec " + num(d2v) + " +/- " + num(results["doctor2vec"].std.pr_auc, 2) + ", median " +
         num(median) + ", deepmatch " + num(deepmatch));
  v.check(d2v >= 0.70, "(a) doctor2vec PR-AUC >= 0.70");
  v.check(d2v - median >= 0.10, "(b) margin over median >= 0.10");
  v.check(d2v > deepmatch, "(b) doctor2vec > deepmatch");
  std::string ratios;
  bool halved = true;
  for (const auto& log : results["doctor2vec"].logs) {
    const double r = log.at(50).train_loss / log.at(0).train_loss;
    ratios += (ratios.empty() ? "" : "/") + num(r, 3);
    halved = halved && r < 0.5;
  }
  v.note("epoch-50 / epoch-0 train loss " + ratios);
  v.check(halved, "(c) epoch-50 loss < 0.5 x epoch-0 loss");
  return v.outcome();
}

// ---------------------------------------------------------------------------
// 6. Transfer harness.

Outcome transfer_harness() {
  Verdict v;
  syn::GenConfig cfg;
  cfg.countries = {"US", "GB"};
  cfg.country_weights = {0.5, 0.5};
  const auto corpus = syn::generate_corpus(cfg);

  eval::ExperimentSpec spec;
  spec.mode = eval::Mode::kTransferCountry;
  spec.train_filter = eval::TrialFilter::parse("country=US");
  spec.test_filter = eval::TrialFilter::parse("country=GB");
  spec.seeds = {1, 2, 3};
  spec.train.max_epochs = kPlantedEpochs;
  const auto split = eval::plan_split(corpus, spec, 1);
  v.note(std::to_string(split.train.size()) + "/" + std::to_string(split.validation.size()) + "/" +
         std::to_string(split.test.size()) + " train/val/test samples");

  spec.model.kind = "doctor2vec";
  const auto d2v = eval::run_experiment(corpus, spec);
  spec.model.kind = "median";
  const auto median = eval::run_experiment(corpus, spec);
  v.note("test PR-AUC doctor2vec " + num(d2v.mean.pr_auc) + ", median " + num(median.mean.pr_auc));
  v.check(d2v.mean.pr_auc >= median.mean.pr_auc + 0.05, "doctor2vec >= median + 0.05");

  bool rejected = false;
  auto overlap = spec;
  overlap.test_filter = eval::TrialFilter::parse("country=US");
  try {
    eval::plan_split(corpus, overlap, 1);
  } catch (const ValidationError&) {
    rejected = true;
  }
  v.note(std::string("overlapping filters ") + (rejected ? "rejected" : "accepted"));
  v.check(rejected, "overlap is a hard error");
  return v.outcome();
}

// ---------------------------------------------------------------------------
// 7. Determinism and persistence.

bool same_logs(const std::vector<std::vector<mem::EpochLog>>& a, const std::vector<std::vector<mem::EpochLog>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return false;
    for (std::size_t e = 0; e < a[i].size(); ++e) {
      const auto& x = a[i][e];
      const auto& y = b[i][e];
      if (x.epoch != y.epoch || std::memcmp(&x.train_loss, &y.train_loss, sizeof(double)) != 0 ||
          std::memcmp(&x.val_loss, &y.val_loss, sizeof(double)) != 0 ||
          std::memcmp(&x.val_pr_auc, &y.val_pr_auc, sizeof(double)) != 0)
        return false;
    }
  }
  return true;
}

Outcome determinism() {
  Verdict v;
  syn::GenConfig cfg;
  cfg.n_doctors = 80;
  cfg.n_trials = 16;
  cfg.investigators_per_trial = {10, 16};
  cfg.calibration_tolerance = 1.0;
  cfg.seed = 31;
  const auto c1 = syn::generate_corpus(cfg);
  const auto c2 = syn::generate_corpus(cfg);
  const auto bytes = data::corpus_to_string(c1);
  v.check(bytes == data::corpus_to_string(c2), "corpus bytes");
  std::istringstream is(bytes);
  v.check(data::corpus_to_string(data::read_corpus(is)) == bytes, "corpus save/load/save");

  eval::ExperimentSpec spec;
  spec.seeds = {5, 6};
  spec.train.max_epochs = 3;
  spec.model.doctor2vec.text_dim = 128;
  bool logs_equal = true, csv_equal = true;
  for (const std::string kind : {"doctor2vec", "lstm", "logreg"}) {
    spec.model.kind = kind;
    const auto a = eval::run_experiment(c1, spec);
    const auto b = eval::run_experiment(c2, spec);
    std::ostringstream ca, cb;
    eval::write_result_rows(ca, a);
    eval::write_result_rows(cb, b);
    logs_equal = logs_equal && same_logs(a.logs, b.logs);
    csv_equal = csv_equal && ca.str() == cb.str();
  }
  v.check(logs_equal, "training logs");
  v.check(csv_equal, "results CSV");

  eval::ModelSettings settings;
  auto model = eval::make_model(settings, c1, 5);
  const auto split = eval::plan_split(c1, spec, 5);
  mem::TrainConfig tc;
  tc.max_epochs = 2;
  mem::train(*model, c1, split.train, split.validation, tc);
  const auto path = std::filesystem::temp_directory_path() / "d2v_acceptance.ckpt";
  cli::CheckpointHeader header;
  header.model_kind = model->kind();
  header.model_config = model->config();
  cli::save_checkpoint(path, header, model->params());
  const auto ck = cli::read_checkpoint(path);
  std::filesystem::remove(path);
  auto restored = eval::make_model(ck.header.model_kind, ck.header.model_config, c1);
  cli::restore_parameters(ck, restored->params());
  std::vector<std::size_t> all(c1.samples.size());
  std::iota(all.begin(), all.end(), 0);
  const auto probe = mem::pairs_of(c1, all);
  const auto p1 = mem::predict(*model, probe);
  const auto p2 = mem::predict(*restored, probe);
  bool bitwise = true;
  for (std::size_t i = 0; i < probe.size(); ++i)
    bitwise = bitwise && std::memcmp(p1.probs[i].data(), p2.probs[i].data(), sizeof(p1.probs[i])) == 0 &&
              std::memcmp(&p1.rate[i], &p2.rate[i], sizeof(double)) == 0;
  v.check(bitwise, "checkpoint probe batch");
  v.note("corpus " + std::to_string(bytes.size()) + " bytes identical; logs, CSV rows and " +
         std::to_string(probe.size()) + "-pair probe predictions compared bitwise");
  return v.outcome();
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace d2v::acceptance

int main(int argc, char** argv) {
  using namespace d2v::acceptance;
  const std::vector<Criterion> all = {
      {1, "gradient integrity", 60, gradient_integrity},
      {2, "memory-network invariants", 10, memory_invariants},
      {3, "metric oracles", 30, metric_oracles},
      {4, "label pipeline", 30, label_pipeline},
      {5, "planted-signal learning", 900, planted_signal},
      {6, "transfer harness", 900, transfer_harness},
      {7, "determinism and persistence", 120, determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int id = std::atoi(argv[i]);
    if (id < 1 || id > static_cast<int>(all.size())) {
      std::cerr << "usage: " << argv[0] << " [criterion 1-7 ...]\n";
      return 2;
    }
    selected.insert(id);
  }
  int failed = 0, ran = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    const double secs = elapsed(t0);
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (pass ? "PASS" : "FAIL") << "  " << o.detail
              << "; " << num(secs, 3) << " s of " << c.budget_seconds << " s" << (in_time ? "" : " (over budget)")
              << std::endl;
  }
  std::cout << "acceptance: " << ran - failed << "/" << ran << " passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
