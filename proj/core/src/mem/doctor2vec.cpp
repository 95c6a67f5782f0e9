#include "d2v/mem/doctor2vec.h"

#include <numeric>
#include <unordered_map>

#include "d2v/error.h"

namespace d2v::mem {

using num::Tape;
using num::Tensor;
using num::Var;

void to_json(nlohmann::json& j, const Doctor2VecConfig& c) {
  j = {{"visit_dim", c.visit_dim},
       {"hidden", c.hidden},
       {"query_dim", c.query_dim},
       {"categorical_layers", c.categorical_layers},
       {"memory_layers", c.memory_layers},
       {"text_dim", c.text_dim},
       {"text_mode", c.text_mode},
       {"embedding_file", c.embedding_file},
       {"k_max", c.k_max},
       {"identity_generalization", c.identity_generalization},
       {"generalization_passes", c.generalization_passes},
       {"lstm_l2", c.lstm_l2},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, Doctor2VecConfig& c) {
  j.at("visit_dim").get_to(c.visit_dim);
  j.at("hidden").get_to(c.hidden);
  j.at("query_dim").get_to(c.query_dim);
  j.at("categorical_layers").get_to(c.categorical_layers);
  j.at("memory_layers").get_to(c.memory_layers);
  j.at("text_dim").get_to(c.text_dim);
  j.at("text_mode").get_to(c.text_mode);
  j.at("embedding_file").get_to(c.embedding_file);
  j.at("k_max").get_to(c.k_max);
  j.at("identity_generalization").get_to(c.identity_generalization);
  j.at("generalization_passes").get_to(c.generalization_passes);
  j.at("lstm_l2").get_to(c.lstm_l2);
  j.at("seed").get_to(c.seed);
}

Doctor2Vec::Doctor2Vec(const data::Corpus& corpus, const Doctor2VecConfig& config,
                       std::shared_ptr<const enc::TextEmbedder> embedder)
    : corpus_(corpus), config_(config) {
  D2V_REQUIRE(!corpus.doctors.empty() && !corpus.trials.empty(), "doctor2vec: empty corpus");
  if (!embedder) embedder = enc::make_text_embedder(config.text_mode, config.text_dim, config.embedding_file);
  D2V_REQUIRE(embedder->dim() == config.text_dim, "doctor2vec: text embedder dimension differs from text_dim");

  std::mt19937_64 rng(config.seed);
  patients_ = enc::PatientEncoder(params_, {corpus.vocab.total(), config.visit_dim, config.hidden}, rng);
  trials_ = enc::TrialEncoder(
      params_, {corpus.categorical_width(), config.categorical_layers, config.text_dim, config.query_dim}, rng);
  MemoryConfig mc;
  mc.input_dim = patients_.out_dim();
  mc.layers = config.memory_layers;
  mc.query_dim = config.query_dim;
  mc.identity_generalization = config.identity_generalization;
  mc.generalization_passes = config.generalization_passes;
  memory_ = MemoryNetwork(params_, mc, rng);
  static_dim_ = corpus.static_feature_names.size();
  const std::size_t head_in = memory_.out_dim() + config.query_dim + static_dim_;
  head_ = enc::Linear(params_, "head.cls", head_in, data::kNumBins, rng);
  regression_ = enc::Linear(params_, "head.reg", head_in, 1, rng);
  lstm_kernels_ = {&params_.get("patient.rnn.fwd.w_x"), &params_.get("patient.rnn.bwd.w_x")};

  for (const auto& d : corpus.doctors) {
    selected_.push_back(recent_patients(d, config.k_max));
    std::vector<std::vector<std::uint32_t>> codes;
    std::vector<std::size_t> offsets{0};
    for (auto k : selected_.back()) {
      for (const auto& v : d.patients[k].visits) codes.push_back(v.concatenated(corpus.vocab));
      offsets.push_back(codes.size());
    }
    visit_codes_.push_back(std::move(codes));
    visit_offsets_.push_back(std::move(offsets));
  }
  std::vector<std::size_t> all(corpus.trials.size());
  std::iota(all.begin(), all.end(), 0);
  onehots_ = enc::categorical_onehots(corpus, all);
  texts_ = enc::embed_trial_texts(corpus, *embedder);
}

nlohmann::json Doctor2Vec::config() const { return config_; }

std::optional<Var> Doctor2Vec::regularizer(Tape& tape) const {
  if (config_.lstm_l2 <= 0.0) return std::nullopt;
  const Var penalty = num::add(num::square_sum(tape.param(*lstm_kernels_[0])),
                               num::square_sum(tape.param(*lstm_kernels_[1])));
  return num::scale(penalty, config_.lstm_l2);
}

ForwardOutput Doctor2Vec::forward(Tape& tape, std::span<const Pair> pairs) const {
  D2V_REQUIRE(!pairs.empty(), "doctor2vec: empty batch");
  // Deduplicate doctors and trials in order of first appearance.
  std::unordered_map<std::size_t, std::size_t> doc_slot, trial_slot;
  std::vector<std::size_t> docs, trials, doctor_of, trial_of;
  for (const auto& p : pairs) {
    D2V_REQUIRE(p.doctor < corpus_.doctors.size() && p.trial < corpus_.trials.size(), "doctor2vec: pair out of range");
    auto [di, dnew] = doc_slot.try_emplace(p.doctor, docs.size());
    if (dnew) docs.push_back(p.doctor);
    auto [ti, tnew] = trial_slot.try_emplace(p.trial, trials.size());
    if (tnew) trials.push_back(p.trial);
    doctor_of.push_back(di->second);
    trial_of.push_back(ti->second);
  }

  enc::PatientBatch batch;
  batch.offsets.push_back(0);
  std::vector<std::size_t> doctor_offsets{0};
  std::vector<std::size_t> row_patient;
  for (auto d : docs) {
    const auto& codes = visit_codes_[d];
    const auto& offs = visit_offsets_[d];
    const std::size_t base = batch.visit_codes.size();
    batch.visit_codes.insert(batch.visit_codes.end(), codes.begin(), codes.end());
    for (std::size_t k = 1; k < offs.size(); ++k) batch.offsets.push_back(base + offs[k]);
    row_patient.insert(row_patient.end(), selected_[d].begin(), selected_[d].end());
    doctor_offsets.push_back(row_patient.size());
  }

  const auto enc_out = patients_.encode(tape, batch);
  const MemoryBank bank = memory_.build(tape, enc_out.embeddings, doctor_offsets);

  Tensor onehot = Tensor::matrix(trials.size(), onehots_.cols());
  Tensor text = Tensor::matrix(trials.size(), texts_.cols());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    std::copy_n(onehots_.row_span(trials[i]).begin(), onehots_.cols(), onehot.row_span(i).begin());
    std::copy_n(texts_.row_span(trials[i]).begin(), texts_.cols(), text.row_span(i).begin());
  }
  Var q_unique = trials_.encode(tape, tape.constant(std::move(onehot)), tape.constant(std::move(text)));
  Var q = num::gather_rows(q_unique, trial_of);

  MemoryReadout readout = memory_.query(tape, bank, q, doctor_of);

  std::vector<Var> parts{readout.response, q};
  if (static_dim_ > 0) {
    Tensor st = Tensor::matrix(pairs.size(), static_dim_);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& f = corpus_.doctors[pairs[i].doctor].static_features;
      std::copy(f.begin(), f.end(), st.row_span(i).begin());
    }
    parts.push_back(tape.constant(std::move(st)));
  }
  Var x = num::concat_cols(parts);

  ForwardOutput out;
  out.probs = num::softmax_rows(head_(tape, x));
  out.rate = num::sigmoid(regression_(tape, x));
  out.attention = readout.attention;
  out.attention_offsets = std::move(readout.offsets);
  for (auto r : readout.rows) out.attention_patients.push_back(row_patient[r]);
  return out;
}

}  // namespace d2v::mem
