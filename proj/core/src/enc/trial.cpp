#include "d2v/enc/trial.h"

#include <algorithm>

#include "d2v/error.h"

namespace d2v::enc {

using num::Tape;
using num::Var;

num::Tensor categorical_onehots(const data::Corpus& corpus, std::span<const std::size_t> trial_indices) {
  const std::size_t width = corpus.categorical_width();
  num::Tensor out = num::Tensor::matrix(trial_indices.size(), width);
  for (std::size_t r = 0; r < trial_indices.size(); ++r) {
    D2V_REQUIRE(trial_indices[r] < corpus.trials.size(), "categorical_onehots: trial index out of range");
    const auto& t = corpus.trials[trial_indices[r]];
    if (t.categorical.size() != corpus.categories.size())
      throw ValidationError("trial " + t.id + " has the wrong number of categorical fields");
    std::size_t base = 0;
    for (std::size_t f = 0; f < corpus.categories.size(); ++f) {
      const std::size_t n = corpus.categories[f].values.size();
      if (t.categorical[f] >= n)
        throw ValidationError("trial " + t.id + ": category index out of range for " + corpus.categories[f].name);
      out.at(r, base + t.categorical[f]) = 1.0;
      base += n;
    }
  }
  return out;
}

num::Tensor embed_trial_texts(const data::Corpus& corpus, const TextEmbedder& embedder) {
  num::Tensor out = num::Tensor::matrix(corpus.trials.size(), embedder.dim());
  for (std::size_t i = 0; i < corpus.trials.size(); ++i) {
    const auto v = embedder.embed(corpus.trials[i].text_tokens);
    std::copy(v.begin(), v.end(), out.row_span(i).begin());
  }
  return out;
}

TrialEncoder::TrialEncoder(num::ParameterStore& store, const TrialEncoderConfig& config, std::mt19937_64& rng,
                           const std::string& prefix)
    : config_(config) {
  D2V_REQUIRE(config.categorical_width > 0 && config.text_dim > 0 && config.query_dim > 0,
              "trial encoder dims must be positive");
  cat_mlp_ = Mlp(store, prefix + ".cat", config.categorical_width, config.categorical_layers, rng);
  proj_cat_ = Linear(store, prefix + ".proj_cat", cat_mlp_.out_dim(), config.query_dim, rng);
  proj_text_ = Linear(store, prefix + ".proj_text", config.text_dim, config.query_dim, rng);
}

Var TrialEncoder::categorical(Tape& tape, Var onehots) const { return cat_mlp_(tape, onehots); }

Var TrialEncoder::fuse(Tape& tape, Var cat_emb, Var text_emb) const {
  D2V_REQUIRE(cat_emb.rows() == text_emb.rows(), "fuse: row count mismatch");
  return num::mul(proj_cat_(tape, cat_emb), proj_text_(tape, text_emb));
}

Var TrialEncoder::encode(Tape& tape, Var onehots, Var text) const {
  return fuse(tape, categorical(tape, onehots), text);
}

}  // namespace d2v::enc
