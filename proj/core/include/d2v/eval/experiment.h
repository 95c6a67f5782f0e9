#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "d2v/base/baselines.h"
#include "d2v/data/types.h"
#include "d2v/mem/calibrate.h"
#include "d2v/mem/doctor2vec.h"
#include "d2v/mem/trainer.h"

namespace d2v::eval {

enum class Mode { kStandard, kTransferCountry, kTransferDisease };

// "standard", "transfer_country", "transfer_disease".
std::string mode_name(Mode m);
// Throws ValidationError on an unknown name.
Mode parse_mode(const std::string& name);

// Selects trials whose categorical field `field` has the value label `value`.
struct TrialFilter {
  std::string field;
  std::string value;

  // Parses "field=value"; throws ValidationError when malformed.
  static TrialFilter parse(const std::string& text);
  std::string str() const { return field + "=" + value; }
  // Throws ValidationError when the field or value is unknown to the corpus.
  std::vector<std::size_t> select(const data::Corpus& corpus) const;
};

// "doctor2vec" or one of base::baseline_kinds().
struct ModelSettings {
  std::string kind = "doctor2vec";
  mem::Doctor2VecConfig doctor2vec;
  base::BaselineConfig baseline;
};

const std::vector<std::string>& model_kinds();
// Builds the model with every seed field replaced by `seed`.
std::unique_ptr<mem::Model> make_model(const ModelSettings& settings, const data::Corpus& corpus, std::uint64_t seed);
// Rebuilds a model from its kind and Model::config() JSON.
std::unique_ptr<mem::Model> make_model(const std::string& kind, const nlohmann::json& config,
                                       const data::Corpus& corpus);

struct ExperimentSpec {
  Mode mode = Mode::kStandard;
  // Required in transfer modes, ignored in standard mode.
  std::optional<TrialFilter> train_filter;
  std::optional<TrialFilter> test_filter;
  ModelSettings model;
  mem::TrainConfig train;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  // Hash written to the results; derived from the spec when empty.
  std::string config_hash;
};

nlohmann::json spec_json(const ExperimentSpec& spec);
// 16 hex digits of FNV-1a over the canonical (sorted-key) JSON dump.
std::string canonical_hash(const nlohmann::json& j);

// Sample indices of one run.
struct SplitPlan {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Standard mode: 70:20:10 train:test:validation trial-disjoint split.
// Transfer modes: the train filter's trials split 85:15 into train and
// validation, the test filter's trials form the test set. Throws
// ValidationError when the filters share a trial or select nothing.
SplitPlan plan_split(const data::Corpus& corpus, const ExperimentSpec& spec, std::uint64_t seed);

struct MetricReport {
  std::string model;
  std::string mode;
  std::uint64_t seed = 0;
  double pr_auc = 0.0;     // macro one-vs-rest
  double precision = 0.0;  // macro over classes present in the test labels
  double recall = 0.0;
  double r2 = 0.0;
  double mse = 0.0;
  std::array<std::optional<double>, data::kNumBins> class_pr_auc{};
  std::array<double, data::kNumBins> class_precision{};
  std::array<double, data::kNumBins> class_recall{};
  std::array<std::size_t, data::kNumBins> class_support{};
  std::size_t n_samples = 0;
  std::string config_hash;
  int best_epoch = 0;
  mem::Thresholds thresholds;
};

// Calibrates thresholds on the validation samples (argmax when there are
// none) and scores the test samples.
MetricReport evaluate_model(const mem::Model& model, const data::Corpus& corpus,
                            std::span<const std::size_t> validation, std::span<const std::size_t> test);

struct Aggregate {
  double pr_auc = 0.0, precision = 0.0, recall = 0.0, r2 = 0.0, mse = 0.0;
  double n_samples = 0.0;
};

struct ExperimentResult {
  std::vector<MetricReport> runs;
  std::vector<std::vector<mem::EpochLog>> logs;  // per run
  Aggregate mean;
  Aggregate std;  // sample standard deviation; zero for a single run
};

struct RunHooks {
  // Called before each seed's training starts.
  std::function<void(std::uint64_t seed)> on_seed;
  mem::EpochCallback on_epoch;
  // Called with each seed's trained model and its report.
  std::function<void(const mem::Model& model, const MetricReport& report)> on_trained;
};

ExperimentResult run_experiment(const data::Corpus& corpus, const ExperimentSpec& spec, const RunHooks& hooks = {});

// Results CSV. The header is
//   model,mode,seed,pr_auc,precision,recall,r2,mse,n_test,config_hash
// followed by one row per run and one row with seed=agg holding the means.
inline constexpr const char* kResultsHeader = "model,mode,seed,pr_auc,precision,recall,r2,mse,n_test,config_hash";
void write_result_rows(std::ostream& os, const ExperimentResult& result);
// Appends the rows to `path`, writing the header first when the file does
// not contain it yet.
void append_results(const std::string& path, const ExperimentResult& result);
// Appends "# provenance <json>" to `path`.
void append_provenance(const std::string& path, const nlohmann::json& record);

}  // namespace d2v::eval
