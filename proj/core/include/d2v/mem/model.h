#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "d2v/data/types.h"
#include "d2v/eval/metrics.h"
#include "d2v/num/tape.h"

namespace d2v::mem {

// A doctor/trial pair by corpus position.
struct Pair {
  std::size_t doctor = 0;
  std::size_t trial = 0;
};

std::vector<Pair> pairs_of(const data::Corpus& corpus, std::span<const std::size_t> sample_indices);

struct ForwardOutput {
  num::Var probs;  // [n, 5]
  num::Var rate;   // [n, 1], normalized-rate regression head
  // Attention over each pair's memory rows, for models that have one.
  std::optional<num::Var> attention;     // [sum of segment sizes, 1]
  std::vector<std::size_t> attention_offsets;
  std::vector<std::size_t> attention_patients;  // patient index in the doctor record, per attention row
};

// Common surface of Doctor2Vec and the baselines. A model is bound to the
// corpus it was built for; pairs index into that corpus.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string kind() const = 0;
  virtual num::ParameterStore& params() = 0;
  const num::ParameterStore& params() const { return const_cast<Model*>(this)->params(); }
  virtual ForwardOutput forward(num::Tape& tape, std::span<const Pair> pairs) const = 0;
  // Configuration needed to rebuild an identically shaped model.
  virtual nlohmann::json config() const = 0;

  // Added to the training loss when present (e.g. an L2 penalty).
  virtual std::optional<num::Var> regularizer(num::Tape&) const { return std::nullopt; }
  // Gradient-free models are fitted once instead of trained.
  virtual bool trainable() const { return true; }
  virtual void fit(std::span<const std::size_t> /*train_samples*/) {}
};

struct Predictions {
  std::vector<eval::ClassProbs> probs;
  std::vector<double> rate;
};

// Batched inference over frozen parameters.
Predictions predict(const Model& model, std::span<const Pair> pairs, std::size_t chunk = 256);

// Doctor-level helper shared by models: the indices of the at most k_max
// most recent patients (by last visit), in chronological order.
std::vector<std::size_t> recent_patients(const data::DoctorRecord& doctor, std::size_t k_max);

}  // namespace d2v::mem
