#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "d2v/mem/model.h"

namespace d2v::mem {

struct TrainConfig {
  std::size_t batch_size = 128;
  int max_epochs = 200;
  double learning_rate = 0.001;
  double decay = 0.02;  // lr <- lr * (1 - decay) per epoch
  std::uint64_t seed = 1;
  double class_weight = 1.0;
  double regression_weight = 1.0;
  // Stop when validation PR-AUC has not improved for this many epochs
  // (0 disables early stopping).
  int patience = 0;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochLog {
  int epoch = 0;
  // Epoch 0: loss of the initial parameters on the whole training set.
  // Epoch e >= 1: sample-weighted mean of the minibatch losses during epoch e.
  double train_loss = 0.0;
  // NaN when the validation set is empty; falls back to -loss when no class
  // has both positive and negative validation samples.
  double val_pr_auc = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_pr_auc = 0.0;
};

// Loss of a forward pass: class_weight * CE + regression_weight * MSE.
num::Var joint_loss(const ForwardOutput& out, std::span<const int> classes, std::span<const double> rates,
                    double class_weight, double regression_weight);

// Mean joint loss over samples under the current parameters (no update).
double evaluate_loss(const Model& model, const data::Corpus& corpus, std::span<const std::size_t> samples,
                     const TrainConfig& config);

using EpochCallback = std::function<void(const EpochLog&)>;

// Minibatch Adam training. After every epoch the model is scored on the
// validation samples; the parameters of the best-scoring epoch are restored
// at the end. Throws DivergenceError on a non-finite loss. Models that are
// not trainable are fitted on the training samples and get an empty log.
TrainResult train(Model& model, const data::Corpus& corpus, std::span<const std::size_t> train_samples,
                  std::span<const std::size_t> val_samples, const TrainConfig& config,
                  const EpochCallback& on_epoch = nullptr);

}  // namespace d2v::mem
