#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "d2v/error.h"
#include "d2v/eval/experiment.h"
#include "d2v/syn/generator.h"

namespace d2v::eval {
namespace {

data::Corpus two_country_corpus() {
  syn::GenConfig cfg;
  cfg.n_doctors = 60;
  cfg.n_trials = 16;
  cfg.investigators_per_trial = {6, 10};
  cfg.countries = {"US", "ZA"};
  cfg.country_weights = {0.7, 0.3};
  cfg.calibration_tolerance = 1.0;
  cfg.seed = 11;
  return syn::generate_corpus(cfg);
}

std::set<std::size_t> trials_of(const data::Corpus& c, const std::vector<std::size_t>& samples) {
  std::set<std::size_t> out;
  for (auto i : samples) out.insert(c.samples[i].trial);
  return out;
}

ExperimentSpec small_spec(const std::string& kind) {
  ExperimentSpec s;
  s.model.kind = kind;
  s.model.baseline.mlp_layers = {16};
  s.model.baseline.visit_dim = 8;
  s.model.baseline.lstm_hidden = 8;
  s.model.baseline.doctor_layers = {8};
  s.model.baseline.categorical_layers = {8};
  s.model.baseline.trial_dim = 4;
  s.model.doctor2vec.visit_dim = 8;
  s.model.doctor2vec.hidden = 6;
  s.model.doctor2vec.query_dim = 6;
  s.model.doctor2vec.categorical_layers = {8, 6};
  s.model.doctor2vec.memory_layers = {8, 6};
  s.model.doctor2vec.text_dim = 32;
  s.train.max_epochs = 2;
  s.train.learning_rate = 0.01;
  s.seeds = {1, 2};
  return s;
}

TEST(ExperimentSpecTest, ModesAndFiltersParse) {
  EXPECT_EQ(parse_mode("standard"), Mode::kStandard);
  EXPECT_EQ(parse_mode("country"), Mode::kTransferCountry);
  EXPECT_EQ(parse_mode("transfer_disease"), Mode::kTransferDisease);
  EXPECT_EQ(mode_name(Mode::kTransferCountry), "transfer_country");
  EXPECT_THROW(parse_mode("sideways"), ValidationError);
  const auto f = TrialFilter::parse("country=US");
  EXPECT_EQ(f.field, "country");
  EXPECT_EQ(f.value, "US");
  for (const char* bad : {"country", "=US", "country=", ""}) EXPECT_THROW(TrialFilter::parse(bad), ValidationError);
}

TEST(ExperimentSpecTest, FilterSelectsMatchingTrials) {
  const auto c = two_country_corpus();
  const auto us = TrialFilter::parse("country=US").select(c);
  const auto za = TrialFilter::parse("country=ZA").select(c);
  EXPECT_EQ(us.size() + za.size(), c.trials.size());
  for (auto t : us) EXPECT_EQ(c.category_value(c.trials[t], "country"), "US");
  EXPECT_THROW(TrialFilter::parse("country=FR").select(c), ValidationError);
  EXPECT_THROW(TrialFilter::parse("planet=earth").select(c), ValidationError);
}

TEST(ExperimentSpecTest, HashIsStableAndSensitive) {
  const auto a = small_spec("logreg");
  EXPECT_EQ(canonical_hash(spec_json(a)), canonical_hash(spec_json(small_spec("logreg"))));
  EXPECT_EQ(canonical_hash(spec_json(a)).size(), 16u);
  auto b = a;
  b.train.learning_rate = 0.02;
  EXPECT_NE(canonical_hash(spec_json(a)), canonical_hash(spec_json(b)));
  // Key order in the input does not matter.
  EXPECT_EQ(canonical_hash(nlohmann::json::parse(R"({"a":1,"b":2})")),
            canonical_hash(nlohmann::json::parse(R"({"b":2,"a":1})")));
}

TEST(SplitPlanTest, StandardModeIsTrialDisjointSeventyTwentyTen) {
  const auto c = two_country_corpus();
  const auto p = plan_split(c, ExperimentSpec{}, 4);
  const auto tr = trials_of(c, p.train), te = trials_of(c, p.test), va = trials_of(c, p.validation);
  EXPECT_EQ(tr.size(), 11u);  // round(0.7 * 16)
  EXPECT_EQ(te.size(), 3u);   // round(0.2 * 16)
  EXPECT_EQ(va.size(), 2u);
  for (auto t : tr) EXPECT_FALSE(te.count(t) || va.count(t));
  for (auto t : te) EXPECT_FALSE(va.count(t));
  EXPECT_EQ(p.train.size() + p.test.size() + p.validation.size(), c.samples.size());
}

TEST(SplitPlanTest, TransferModeUsesFilterRegions) {
  const auto c = two_country_corpus();
  ExperimentSpec s;
  s.mode = Mode::kTransferCountry;
  s.train_filter = TrialFilter::parse("country=US");
  s.test_filter = TrialFilter::parse("country=ZA");
  const auto p = plan_split(c, s, 2);
  const auto us = TrialFilter::parse("country=US").select(c);
  const auto za = TrialFilter::parse("country=ZA").select(c);
  const std::set<std::size_t> us_set(us.begin(), us.end()), za_set(za.begin(), za.end());
  for (auto t : trials_of(c, p.train)) EXPECT_TRUE(us_set.count(t));
  for (auto t : trials_of(c, p.validation)) EXPECT_TRUE(us_set.count(t));
  EXPECT_EQ(trials_of(c, p.test), za_set);
  const double frac = static_cast<double>(trials_of(c, p.train).size()) / static_cast<double>(us.size());
  EXPECT_NEAR(frac, 0.85, 0.5 / static_cast<double>(us.size()) + 1e-12);
}

TEST(SplitPlanTest, OverlappingFiltersAreRejected) {
  const auto c = two_country_corpus();
  ExperimentSpec s;
  s.mode = Mode::kTransferCountry;
  s.train_filter = TrialFilter::parse("country=US");
  s.test_filter = TrialFilter::parse("country=US");
  EXPECT_THROW(plan_split(c, s, 1), ValidationError);
  s.test_filter = TrialFilter::parse("study_type=interventional");
  EXPECT_THROW(plan_split(c, s, 1), ValidationError);
  s.test_filter.reset();
  EXPECT_THROW(plan_split(c, s, 1), ValidationError);
}

TEST(EvaluateModelTest, MedianReportMatchesDirectMetrics) {
  const auto c = two_country_corpus();
  const auto p = plan_split(c, ExperimentSpec{}, 1);
  ModelSettings ms;
  ms.kind = "median";
  auto m = make_model(ms, c, 1);
  m->fit(p.train);
  const auto r = evaluate_model(*m, c, p.validation, p.test);
  std::vector<double> pred, truth;
  const auto& med = dynamic_cast<const base::MedianBaseline&>(*m);
  const auto area = c.category_index("area");
  for (auto i : p.test) {
    pred.push_back(med.area_median(c.trials[c.samples[i].trial].categorical[area]));
    truth.push_back(c.samples[i].label.normalized_rate);
  }
  EXPECT_DOUBLE_EQ(r.mse, mean_squared_error(pred, truth));
  EXPECT_DOUBLE_EQ(r.r2, r2_score(pred, truth));
  EXPECT_EQ(r.n_samples, p.test.size());
  EXPECT_GE(r.pr_auc, 0.0);
  EXPECT_LE(r.pr_auc, 1.0);
  EXPECT_LE(r.r2, 1.0);
}

TEST(RunExperimentTest, SameSeedGivesIdenticalResultsFiles) {
  const auto c = two_country_corpus();
  for (const std::string kind : {"median", "logreg", "doctor2vec"}) {
    std::vector<std::string> files;
    for (int rep = 0; rep < 2; ++rep) {
      const auto result = run_experiment(c, small_spec(kind));
      ASSERT_EQ(result.runs.size(), 2u);
      std::ostringstream os;
      write_result_rows(os, result);
      files.push_back(os.str());
    }
    EXPECT_EQ(files[0], files[1]) << kind;
  }
}

TEST(RunExperimentTest, CsvRowsAndAggregate) {
  const auto c = two_country_corpus();
  const auto spec = small_spec("logreg");
  const auto result = run_experiment(c, spec);
  const auto path = std::filesystem::temp_directory_path() / "d2v_results_test.csv";
  std::filesystem::remove(path);
  append_results(path.string(), result);
  append_provenance(path.string(), {{"config_hash", result.runs[0].config_hash}});
  append_results(path.string(), result);
  std::ifstream is(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 1u + 3u + 1u + 3u);
  EXPECT_EQ(lines[0], kResultsHeader);
  EXPECT_EQ(lines[1].rfind("logreg,standard,1,", 0), 0u);
  EXPECT_EQ(lines[3].rfind("logreg,standard,agg,", 0), 0u);
  EXPECT_EQ(lines[4].rfind("# provenance {", 0), 0u);
  EXPECT_EQ(lines[5].rfind("logreg,standard,1,", 0), 0u);  // no second header
  EXPECT_EQ(std::count(lines[1].begin(), lines[1].end(), ','), 9);
  EXPECT_EQ(result.runs[0].config_hash, canonical_hash(spec_json(spec)));

  const double m = (result.runs[0].pr_auc + result.runs[1].pr_auc) / 2;
  EXPECT_DOUBLE_EQ(result.mean.pr_auc, m);
  EXPECT_NEAR(result.std.pr_auc, std::abs(result.runs[0].pr_auc - result.runs[1].pr_auc) / std::sqrt(2.0), 1e-15);
  std::filesystem::remove(path);
}

TEST(RunExperimentTest, RejectsUnknownModelAndEmptySeeds) {
  const auto c = two_country_corpus();
  auto s = small_spec("forest");
  EXPECT_THROW(run_experiment(c, s), ValidationError);
  s = small_spec("median");
  s.seeds.clear();
  EXPECT_THROW(run_experiment(c, s), ValidationError);
}

TEST(RunExperimentTest, TransferRunScoresOnlyTestRegion) {
  const auto c = two_country_corpus();
  auto s = small_spec("median");
  s.mode = Mode::kTransferCountry;
  s.train_filter = TrialFilter::parse("country=US");
  s.test_filter = TrialFilter::parse("country=ZA");
  s.seeds = {3};
  const auto r = run_experiment(c, s);
  std::size_t za = 0;
  for (const auto& smp : c.samples) za += c.category_value(c.trials[smp.trial], "country") == "ZA";
  EXPECT_EQ(r.runs[0].n_samples, za);
  EXPECT_EQ(r.runs[0].mode, "transfer_country");
}

}  // namespace
}  // namespace d2v::eval
