#include "d2v/enc/patient.h"

#include "d2v/error.h"

namespace d2v::enc {

using num::Tape;
using num::Var;

PatientBatch make_patient_batch(std::span<const data::Patient* const> patients, const data::CodeVocabulary& vocab) {
  PatientBatch b;
  b.offsets.push_back(0);
  for (const auto* p : patients) {
    D2V_REQUIRE(!p->visits.empty(), "patient without visits");
    for (const auto& v : p->visits) b.visit_codes.push_back(v.concatenated(vocab));
    b.offsets.push_back(b.visit_codes.size());
  }
  return b;
}

PatientEncoder::PatientEncoder(num::ParameterStore& store, const PatientEncoderConfig& config, std::mt19937_64& rng,
                               const std::string& prefix)
    : config_(config) {
  D2V_REQUIRE(config.input_dim > 0 && config.visit_dim > 0 && config.hidden > 0, "patient encoder dims must be positive");
  w_emb_ = &store.add_xavier(prefix + ".w_emb", config.input_dim, config.visit_dim, rng);
  rnn_ = BiLstm(store, prefix + ".rnn", config.visit_dim, config.hidden, rng);
  w_alpha_ = &store.add_xavier(prefix + ".w_alpha", 1, 2 * config.hidden, rng);
}

Var PatientEncoder::embed_visits(Tape& tape, std::span<const std::vector<std::uint32_t>> visit_codes) const {
  for (const auto& codes : visit_codes)
    for (auto c : codes)
      D2V_REQUIRE(c < config_.input_dim, "visit code index " + std::to_string(c) + " outside the vocabulary");
  return num::embedding_bag(tape.param(*w_emb_), visit_codes);
}

PatientEncoding PatientEncoder::encode(Tape& tape, const PatientBatch& batch) const {
  D2V_REQUIRE(batch.patients() > 0, "empty patient batch");
  Var h = embed_visits(tape, batch.visit_codes);
  Var g = rnn_.run(tape, h, batch.offsets);
  // A shared score offset cancels in the per-patient softmax, so the scores carry no bias.
  Var e = num::matmul_nt(g, tape.param(*w_alpha_));
  Var alpha = num::segment_softmax(e, batch.offsets);
  Var emb = num::segment_weighted_sum(g, alpha, batch.offsets);
  return {g, alpha, emb};
}

}  // namespace d2v::enc
