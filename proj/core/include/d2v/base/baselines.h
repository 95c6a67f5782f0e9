#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "d2v/enc/layers.h"
#include "d2v/mem/model.h"

namespace d2v::base {

struct BaselineConfig {
  // Hidden widths of the MLP baseline.
  std::vector<std::size_t> mlp_layers{512, 512, 512, 256, 128, 64};
  // L2 penalty on the logistic regression weights.
  double l2 = 1e-4;
  // LSTM baseline.
  std::size_t visit_dim = 128;
  std::size_t lstm_hidden = 124;
  // Width of the trial categorical and text projections (LSTM, DeepMatch).
  std::size_t trial_dim = 64;
  // DeepMatch.
  std::size_t top_k = 50;
  std::vector<std::size_t> doctor_layers{128, 64};
  std::vector<std::size_t> categorical_layers{128, 64};
  // Categorical field holding the therapeutic area (median baseline).
  std::string area_field = "area";
  // Start every weight and bias at zero instead of the random init.
  bool zero_init = false;
  std::uint64_t seed = 1;
};

void to_json(nlohmann::json& j, const BaselineConfig& c);
void from_json(const nlohmann::json& j, BaselineConfig& c);

// Per-area median of the training normalized rates; areas without training
// samples use the global median. The class is the bin of that median and is
// reported as a one-hot probability vector. Medians live in the parameter
// "median.rates" ([areas + 1, 1], global last) so checkpoints carry them.
class MedianBaseline final : public mem::Model {
 public:
  MedianBaseline(const data::Corpus& corpus, const BaselineConfig& config);

  std::string kind() const override { return "median"; }
  num::ParameterStore& params() override { return params_; }
  mem::ForwardOutput forward(num::Tape& tape, std::span<const mem::Pair> pairs) const override;
  nlohmann::json config() const override { return config_; }
  bool trainable() const override { return false; }
  // Throws ValidationError when train_samples is empty.
  void fit(std::span<const std::size_t> train_samples) override;

  double area_median(std::size_t area) const;
  double global_median() const;

 private:
  const data::Corpus& corpus_;
  BaselineConfig config_;
  std::size_t area_field_ = 0;
  std::size_t n_areas_ = 0;
  num::ParameterStore params_;
  num::Parameter* rates_ = nullptr;
};

// Pair features [log(1 + doctor code counts), trial multi-hot, trial tf-idf]
// fed to either a multinomial logistic regression (no hidden layers) or an
// MLP with ReLU hidden layers. Both have a softmax class head and a sigmoid
// rate head.
class FeatureBaseline final : public mem::Model {
 public:
  enum class Kind { kLogReg, kMlp };
  FeatureBaseline(const data::Corpus& corpus, const BaselineConfig& config, Kind kind);

  std::string kind() const override { return kind_ == Kind::kLogReg ? "logreg" : "mlp"; }
  num::ParameterStore& params() override { return params_; }
  mem::ForwardOutput forward(num::Tape& tape, std::span<const mem::Pair> pairs) const override;
  nlohmann::json config() const override { return config_; }
  // L2 penalty on the class and rate weights of the logistic regression.
  std::optional<num::Var> regularizer(num::Tape& tape) const override;

  std::size_t feature_dim() const { return counts_.cols() + onehots_.cols() + tfidf_.cols(); }
  num::Tensor features(std::span<const mem::Pair> pairs) const;

 private:
  const data::Corpus& corpus_;
  BaselineConfig config_;
  Kind kind_;
  num::ParameterStore params_;
  enc::Mlp body_;
  bool has_body_ = false;
  enc::Linear head_;
  enc::Linear regression_;
  num::Tensor counts_;
  num::Tensor onehots_;
  num::Tensor tfidf_;
};

// One LSTM over all of a doctor's visits in global time order; its final
// state is concatenated with linear projections of the trial multi-hot and
// tf-idf vectors.
class LstmBaseline final : public mem::Model {
 public:
  LstmBaseline(const data::Corpus& corpus, const BaselineConfig& config);

  std::string kind() const override { return "lstm"; }
  num::ParameterStore& params() override { return params_; }
  mem::ForwardOutput forward(num::Tape& tape, std::span<const mem::Pair> pairs) const override;
  nlohmann::json config() const override { return config_; }

  // Final LSTM state per doctor, [doctors.size(), lstm_hidden].
  num::Var doctor_states(num::Tape& tape, std::span<const std::size_t> doctors) const;
  const enc::Lstm& rnn() const { return rnn_; }
  num::Parameter& visit_embedding() const { return *w_emb_; }

 private:
  const data::Corpus& corpus_;
  BaselineConfig config_;
  num::ParameterStore params_;
  num::Parameter* w_emb_ = nullptr;
  enc::Lstm rnn_;
  enc::Linear cat_;
  enc::Linear text_;
  enc::Linear head_;
  enc::Linear regression_;
  std::vector<std::vector<std::vector<std::uint32_t>>> sequences_;
  num::Tensor onehots_;
  num::Tensor tfidf_;
};

// Doctor features are log(1 + count) of the top_k most frequent codes,
// passed through an MLP; trial features are an MLP over the multi-hot and a
// linear projection of the tf-idf vector.
class DeepMatchBaseline final : public mem::Model {
 public:
  DeepMatchBaseline(const data::Corpus& corpus, const BaselineConfig& config);

  std::string kind() const override { return "deepmatch"; }
  num::ParameterStore& params() override { return params_; }
  mem::ForwardOutput forward(num::Tape& tape, std::span<const mem::Pair> pairs) const override;
  nlohmann::json config() const override { return config_; }

  const std::vector<std::uint32_t>& codes() const { return codes_; }
  // [doctors, codes().size()]
  const num::Tensor& doctor_features() const { return doctor_features_; }

 private:
  const data::Corpus& corpus_;
  BaselineConfig config_;
  num::ParameterStore params_;
  std::vector<std::uint32_t> codes_;
  enc::Mlp doctor_mlp_;
  enc::Mlp cat_mlp_;
  enc::Linear text_;
  enc::Linear head_;
  enc::Linear regression_;
  num::Tensor doctor_features_;
  num::Tensor onehots_;
  num::Tensor tfidf_;
};

// "median", "logreg", "mlp", "lstm", "deepmatch".
const std::vector<std::string>& baseline_kinds();
std::unique_ptr<mem::Model> make_baseline(const std::string& kind, const data::Corpus& corpus,
                                          const BaselineConfig& config);

}  // namespace d2v::base
