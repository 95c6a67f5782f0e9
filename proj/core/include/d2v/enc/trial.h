#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "d2v/data/types.h"
#include "d2v/enc/layers.h"
#include "d2v/enc/text.h"

namespace d2v::enc {

struct TrialEncoderConfig {
  std::size_t categorical_width = 0;  // sum of category field sizes
  std::vector<std::size_t> categorical_layers{128, 256, 128, 64};
  std::size_t text_dim = 768;
  std::size_t query_dim = 64;  // d_q
};

// Concatenated one-hot rows, one per trial. Throws ValidationError for a
// categorical index outside its field.
num::Tensor categorical_onehots(const data::Corpus& corpus, std::span<const std::size_t> trial_indices);

// Text embeddings of every trial of the corpus, [trials, embedder.dim()].
num::Tensor embed_trial_texts(const data::Corpus& corpus, const TextEmbedder& embedder);

class TrialEncoder {
 public:
  TrialEncoder() = default;
  TrialEncoder(num::ParameterStore& store, const TrialEncoderConfig& config, std::mt19937_64& rng,
               const std::string& prefix = "trial");

  num::Var categorical(num::Tape& tape, num::Var onehots) const;
  // (W_ci cat + b_ci) * (W_ti text + b_ti), elementwise.
  num::Var fuse(num::Tape& tape, num::Var cat_emb, num::Var text_emb) const;
  num::Var encode(num::Tape& tape, num::Var onehots, num::Var text) const;

  const TrialEncoderConfig& config() const { return config_; }

 private:
  TrialEncoderConfig config_;
  Mlp cat_mlp_;
  Linear proj_cat_;
  Linear proj_text_;
};

}  // namespace d2v::enc
