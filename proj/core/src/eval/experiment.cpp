#include "d2v/eval/experiment.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "d2v/data/split.h"
#include "d2v/enc/text.h"
#include "d2v/error.h"
#include "d2v/eval/metrics.h"

namespace d2v::eval {

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kStandard:
      return "standard";
    case Mode::kTransferCountry:
      return "transfer_country";
    case Mode::kTransferDisease:
      return "transfer_disease";
  }
  return "standard";
}

Mode parse_mode(const std::string& name) {
  if (name == "standard") return Mode::kStandard;
  if (name == "transfer_country" || name == "country") return Mode::kTransferCountry;
  if (name == "transfer_disease" || name == "disease") return Mode::kTransferDisease;
  throw ValidationError("unknown experiment mode '" + name + "'");
}

TrialFilter TrialFilter::parse(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size())
    throw ValidationError("trial filter must look like field=value, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

std::vector<std::size_t> TrialFilter::select(const data::Corpus& corpus) const {
  const std::size_t f = corpus.category_index(field);
  const auto v = corpus.categories[f].index(value);
  if (!v) throw ValidationError("trial filter " + str() + ": value not in field '" + field + "'");
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < corpus.trials.size(); ++t)
    if (corpus.trials[t].categorical.at(f) == *v) out.push_back(t);
  return out;
}

const std::vector<std::string>& model_kinds() {
  static const std::vector<std::string> kinds = [] {
    std::vector<std::string> k{"doctor2vec"};
    for (const auto& b : base::baseline_kinds()) k.push_back(b);
    return k;
  }();
  return kinds;
}

std::unique_ptr<mem::Model> make_model(const ModelSettings& settings, const data::Corpus& corpus, std::uint64_t seed) {
  if (settings.kind == "doctor2vec") {
    auto cfg = settings.doctor2vec;
    cfg.seed = seed;
    return std::make_unique<mem::Doctor2Vec>(corpus, cfg);
  }
  auto cfg = settings.baseline;
  cfg.seed = seed;
  return base::make_baseline(settings.kind, corpus, cfg);
}

std::unique_ptr<mem::Model> make_model(const std::string& kind, const nlohmann::json& config,
                                       const data::Corpus& corpus) {
  if (kind == "doctor2vec") return std::make_unique<mem::Doctor2Vec>(corpus, config.get<mem::Doctor2VecConfig>());
  return base::make_baseline(kind, corpus, config.get<base::BaselineConfig>());
}

nlohmann::json spec_json(const ExperimentSpec& spec) {
  nlohmann::json j;
  j["mode"] = mode_name(spec.mode);
  j["train_filter"] = spec.train_filter ? spec.train_filter->str() : "";
  j["test_filter"] = spec.test_filter ? spec.test_filter->str() : "";
  j["model"] = spec.model.kind;
  j["model_config"] = spec.model.kind == "doctor2vec" ? nlohmann::json(spec.model.doctor2vec)
                                                      : nlohmann::json(spec.model.baseline);
  j["train"] = spec.train;
  j["seeds"] = spec.seeds;
  return j;
}

std::string canonical_hash(const nlohmann::json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(enc::fnv1a64(j.dump())));
  return buf;
}

SplitPlan plan_split(const data::Corpus& corpus, const ExperimentSpec& spec, std::uint64_t seed) {
  SplitPlan plan;
  if (spec.mode == Mode::kStandard) {
    auto s = data::split_trial_disjoint(corpus, {0.7, 0.2, 0.1}, seed);
    plan.train = std::move(s.train);
    plan.validation = std::move(s.validation);
    plan.test = std::move(s.test);
    return plan;
  }
  if (!spec.train_filter || !spec.test_filter)
    throw ValidationError(mode_name(spec.mode) + " needs both a train filter and a test filter");
  const auto train_trials = spec.train_filter->select(corpus);
  const auto test_trials = spec.test_filter->select(corpus);
  std::vector<std::size_t> shared;
  std::set_intersection(train_trials.begin(), train_trials.end(), test_trials.begin(), test_trials.end(),
                        std::back_inserter(shared));
  if (!shared.empty())
    throw ValidationError("train filter " + spec.train_filter->str() + " and test filter " + spec.test_filter->str() +
                          " overlap on " + std::to_string(shared.size()) + " trial(s), e.g. " +
                          corpus.trials[shared.front()].id);
  if (train_trials.empty()) throw ValidationError("train filter " + spec.train_filter->str() + " selects no trials");
  if (test_trials.empty()) throw ValidationError("test filter " + spec.test_filter->str() + " selects no trials");
  auto s = data::split_trials(corpus, train_trials, 0.85, seed);
  plan.train = std::move(s.train);
  plan.validation = std::move(s.validation);
  plan.test = data::samples_of_trials(corpus, test_trials);
  return plan;
}

MetricReport evaluate_model(const mem::Model& model, const data::Corpus& corpus,
                            std::span<const std::size_t> validation, std::span<const std::size_t> test) {
  D2V_REQUIRE(!test.empty(), "evaluate_model: empty test set");
  MetricReport r;
  r.model = model.kind();
  r.n_samples = test.size();
  if (validation.empty()) {
    r.thresholds.argmax_only = true;
    r.thresholds.warning = "no validation samples; argmax decisions";
  } else {
    const auto vp = mem::predict(model, mem::pairs_of(corpus, validation));
    std::vector<int> vl;
    for (auto i : validation) vl.push_back(corpus.samples[i].label.bin);
    r.thresholds = mem::calibrate_thresholds(vp.probs, vl);
  }

  const auto tp = mem::predict(model, mem::pairs_of(corpus, test));
  std::vector<int> classes;
  std::vector<double> rates;
  for (auto i : test) {
    classes.push_back(corpus.samples[i].label.bin);
    rates.push_back(corpus.samples[i].label.normalized_rate);
  }
  const auto auc = macro_pr_auc(tp.probs, classes);
  r.pr_auc = auc.value;
  r.class_pr_auc = auc.per_class;
  const auto decided = mem::decide_all(r.thresholds, tp.probs);
  const auto pr = precision_recall(decided, classes);
  r.precision = pr.macro_precision;
  r.recall = pr.macro_recall;
  r.class_precision = pr.precision;
  r.class_recall = pr.recall;
  r.class_support = pr.support;
  r.r2 = r2_score(tp.rate, rates);
  r.mse = mean_squared_error(tp.rate, rates);
  return r;
}

namespace {

Aggregate aggregate(std::span<const MetricReport> runs, bool stddev, const Aggregate& mean) {
  Aggregate a;
  const double n = static_cast<double>(runs.size());
  if (!stddev) {
    for (const auto& r : runs) {
      a.pr_auc += r.pr_auc / n;
      a.precision += r.precision / n;
      a.recall += r.recall / n;
      a.r2 += r.r2 / n;
      a.mse += r.mse / n;
      a.n_samples += static_cast<double>(r.n_samples) / n;
    }
    return a;
  }
  if (runs.size() < 2) return a;
  auto sq = [](double x) { return x * x; };
  for (const auto& r : runs) {
    a.pr_auc += sq(r.pr_auc - mean.pr_auc);
    a.precision += sq(r.precision - mean.precision);
    a.recall += sq(r.recall - mean.recall);
    a.r2 += sq(r.r2 - mean.r2);
    a.mse += sq(r.mse - mean.mse);
    a.n_samples += sq(static_cast<double>(r.n_samples) - mean.n_samples);
  }
  for (double* v : {&a.pr_auc, &a.precision, &a.recall, &a.r2, &a.mse, &a.n_samples}) *v = std::sqrt(*v / (n - 1));
  return a;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

ExperimentResult run_experiment(const data::Corpus& corpus, const ExperimentSpec& spec, const RunHooks& hooks) {
  if (spec.seeds.empty()) throw ValidationError("experiment needs at least one seed");
  if (spec.model.kind != "doctor2vec" &&
      std::find(base::baseline_kinds().begin(), base::baseline_kinds().end(), spec.model.kind) ==
          base::baseline_kinds().end())
    throw ValidationError("unknown model kind '" + spec.model.kind + "'");
  const std::string hash = spec.config_hash.empty() ? canonical_hash(spec_json(spec)) : spec.config_hash;

  ExperimentResult out;
  for (auto seed : spec.seeds) {
    if (hooks.on_seed) hooks.on_seed(seed);
    const SplitPlan plan = plan_split(corpus, spec, seed);
    auto model = make_model(spec.model, corpus, seed);
    mem::TrainConfig tc = spec.train;
    tc.seed = seed;
    const auto trained = mem::train(*model, corpus, plan.train, plan.validation, tc, hooks.on_epoch);
    MetricReport r = evaluate_model(*model, corpus, plan.validation, plan.test);
    r.mode = mode_name(spec.mode);
    r.seed = seed;
    r.config_hash = hash;
    r.best_epoch = trained.best_epoch;
    if (hooks.on_trained) hooks.on_trained(*model, r);
    out.runs.push_back(std::move(r));
    out.logs.push_back(trained.log);
  }
  out.mean = aggregate(out.runs, false, {});
  out.std = aggregate(out.runs, true, out.mean);
  return out;
}

void write_result_rows(std::ostream& os, const ExperimentResult& result) {
  for (const auto& r : result.runs)
    os << r.model << ',' << r.mode << ',' << r.seed << ',' << fmt(r.pr_auc) << ',' << fmt(r.precision) << ','
       << fmt(r.recall) << ',' << fmt(r.r2) << ',' << fmt(r.mse) << ',' << r.n_samples << ',' << r.config_hash
       << '\n';
  if (result.runs.empty()) return;
  const auto& first = result.runs.front();
  const auto& m = result.mean;
  os << first.model << ',' << first.mode << ",agg," << fmt(m.pr_auc) << ',' << fmt(m.precision) << ','
     << fmt(m.recall) << ',' << fmt(m.r2) << ',' << fmt(m.mse) << ',' << fmt(m.n_samples) << ','
     << first.config_hash << '\n';
}

void append_results(const std::string& path, const ExperimentResult& result) {
  bool fresh = true;
  {
    std::ifstream is(path, std::ios::binary);
    for (std::string line; fresh && std::getline(is, line);) fresh = line != kResultsHeader;
  }
  std::ofstream os(path, std::ios::app | std::ios::binary);
  if (!os) throw std::runtime_error("cannot open results file " + path);
  if (fresh) os << kResultsHeader << '\n';
  write_result_rows(os, result);
  if (!os) throw std::runtime_error("failed writing results file " + path);
}

void append_provenance(const std::string& path, const nlohmann::json& record) {
  std::ofstream os(path, std::ios::app | std::ios::binary);
  if (!os) throw std::runtime_error("cannot open results file " + path);
  os << "# provenance " << record.dump() << '\n';
  if (!os) throw std::runtime_error("failed writing results file " + path);
}

}  // namespace d2v::eval
