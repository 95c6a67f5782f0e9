#include "d2v/mem/trainer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "d2v/error.h"
#include "d2v/num/adam.h"

namespace d2v::mem {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},
       {"max_epochs", c.max_epochs},
       {"learning_rate", c.learning_rate},
       {"decay", c.decay},
       {"seed", c.seed},
       {"class_weight", c.class_weight},
       {"regression_weight", c.regression_weight},
       {"patience", c.patience}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("batch_size").get_to(c.batch_size);
  j.at("max_epochs").get_to(c.max_epochs);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("decay").get_to(c.decay);
  j.at("seed").get_to(c.seed);
  j.at("class_weight").get_to(c.class_weight);
  j.at("regression_weight").get_to(c.regression_weight);
  j.at("patience").get_to(c.patience);
}

using num::Tape;
using num::Var;

namespace {

struct Targets {
  std::vector<int> classes;
  std::vector<double> rates;
};

Targets targets_of(const data::Corpus& corpus, std::span<const std::size_t> samples) {
  Targets t;
  for (auto i : samples) {
    t.classes.push_back(corpus.samples[i].label.bin);
    t.rates.push_back(corpus.samples[i].label.normalized_rate);
  }
  return t;
}

struct Scored {
  double loss = std::numeric_limits<double>::quiet_NaN();
  double pr_auc = std::numeric_limits<double>::quiet_NaN();
};

// Loss and macro PR-AUC from a single forward pass over the samples; the
// score falls back to -loss when no class qualifies for PR-AUC.
Scored score(const Model& model, const data::Corpus& corpus, std::span<const std::size_t> samples,
             const TrainConfig& config) {
  Scored out;
  if (samples.empty()) return out;
  const auto t = targets_of(corpus, samples);
  std::vector<eval::ClassProbs> probs;
  probs.reserve(samples.size());
  double total = 0.0;
  const std::size_t chunk = 256;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t n = std::min(chunk, samples.size() - start);
    const auto part = samples.subspan(start, n);
    Tape tape;
    const auto pairs = pairs_of(corpus, part);
    const auto fwd = model.forward(tape, pairs);
    const std::span<const int> cls(t.classes.data() + start, n);
    const std::span<const double> rates(t.rates.data() + start, n);
    total += joint_loss(fwd, cls, rates, config.class_weight, config.regression_weight).value()[0] *
             static_cast<double>(n);
    const auto& p = fwd.probs.value();
    for (std::size_t i = 0; i < n; ++i) {
      eval::ClassProbs row{};
      std::copy_n(p.row_span(i).begin(), data::kNumBins, row.begin());
      probs.push_back(row);
    }
  }
  out.loss = total / static_cast<double>(samples.size());
  try {
    out.pr_auc = eval::macro_pr_auc(probs, t.classes).value;
  } catch (const ValidationError&) {
    out.pr_auc = -out.loss;
  }
  return out;
}

}  // namespace

Var joint_loss(const ForwardOutput& out, std::span<const int> classes, std::span<const double> rates,
               double class_weight, double regression_weight) {
  Var ce = num::scale(num::cross_entropy(out.probs, classes), class_weight);
  if (regression_weight == 0.0) return ce;
  return num::add(ce, num::scale(num::mse(out.rate, rates), regression_weight));
}

double evaluate_loss(const Model& model, const data::Corpus& corpus, std::span<const std::size_t> samples,
                     const TrainConfig& config) {
  return score(model, corpus, samples, config).loss;
}

TrainResult train(Model& model, const data::Corpus& corpus, std::span<const std::size_t> train_samples,
                  std::span<const std::size_t> val_samples, const TrainConfig& config, const EpochCallback& on_epoch) {
  D2V_REQUIRE(!train_samples.empty(), "train: empty training set");
  D2V_REQUIRE(config.batch_size > 0 && config.max_epochs >= 0, "train: invalid batch size or epoch count");
  D2V_REQUIRE(config.learning_rate >= 0.0 && config.decay >= 0.0 && config.decay < 1.0,
              "train: invalid learning rate or decay");
  TrainResult result;
  if (!model.trainable()) {
    model.fit(train_samples);
    result.best_val_pr_auc = std::numeric_limits<double>::quiet_NaN();
    return result;
  }

  auto record = [&](EpochLog e) {
    if (!std::isfinite(e.train_loss))
      throw DivergenceError("training diverged: loss is " + std::to_string(e.train_loss) + " at epoch " +
                            std::to_string(e.epoch));
    result.log.push_back(e);
    if (on_epoch) on_epoch(e);
  };

  EpochLog initial;
  initial.train_loss = evaluate_loss(model, corpus, train_samples, config);
  const Scored v0 = score(model, corpus, val_samples, config);
  initial.val_loss = v0.loss;
  initial.val_pr_auc = v0.pr_auc;
  record(initial);
  if (config.max_epochs == 0) {
    result.best_val_pr_auc = initial.val_pr_auc;
    return result;
  }

  num::Adam adam({config.learning_rate, 0.9, 0.999, 1e-8, config.decay});
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_samples.begin(), train_samples.end());
  auto best = model.params().snapshot();
  result.best_val_pr_auc = initial.val_pr_auc;
  int since_best = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> part(order.data() + start, std::min(config.batch_size, order.size() - start));
      const auto pairs = pairs_of(corpus, part);
      const auto t = targets_of(corpus, part);
      Tape tape;
      const auto out = model.forward(tape, pairs);
      Var loss = joint_loss(out, t.classes, t.rates, config.class_weight, config.regression_weight);
      const double data_loss = loss.value()[0];
      if (!std::isfinite(data_loss))
        throw DivergenceError("training diverged: non-finite minibatch loss at epoch " + std::to_string(epoch));
      if (auto reg = model.regularizer(tape)) loss = num::add(loss, *reg);
      tape.backward(loss);
      adam.step(model.params());
      total += data_loss * static_cast<double>(part.size());
    }
    adam.end_epoch();

    EpochLog e;
    e.epoch = epoch;
    e.train_loss = total / static_cast<double>(order.size());
    const Scored v = score(model, corpus, val_samples, config);
    e.val_loss = v.loss;
    e.val_pr_auc = v.pr_auc;
    record(e);
    if (e.val_pr_auc > result.best_val_pr_auc || std::isnan(result.best_val_pr_auc)) {
      result.best_val_pr_auc = e.val_pr_auc;
      result.best_epoch = epoch;
      best = model.params().snapshot();
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  model.params().restore(best);
  return result;
}

}  // namespace d2v::mem
