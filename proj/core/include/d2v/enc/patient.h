#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "d2v/data/types.h"
#include "d2v/enc/layers.h"

namespace d2v::enc {

struct PatientEncoderConfig {
  std::size_t input_dim = 0;   // |D| + |P| + |M|
  std::size_t visit_dim = 128; // d_h
  std::size_t hidden = 124;    // d_g, per direction
};

// Visits of several patients laid out back to back.
struct PatientBatch {
  std::vector<std::vector<std::uint32_t>> visit_codes;  // concatenated-vector indices
  std::vector<std::size_t> offsets;                     // patient p owns visits [offsets[p], offsets[p+1])
  std::size_t patients() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

PatientBatch make_patient_batch(std::span<const data::Patient* const> patients, const data::CodeVocabulary& vocab);

struct PatientEncoding {
  num::Var states;      // g_t, [visits, 2*d_g]
  num::Var attention;   // alpha_t, [visits, 1], a distribution per patient
  num::Var embeddings;  // I(k), [patients, 2*d_g]
};

class PatientEncoder {
 public:
  PatientEncoder() = default;
  PatientEncoder(num::ParameterStore& store, const PatientEncoderConfig& config, std::mt19937_64& rng,
                 const std::string& prefix = "patient");

  // h_t = W_emb v_t for each visit; W_emb is stored transposed as a
  // [input_dim, visit_dim] table so a visit is the sum of its code rows.
  num::Var embed_visits(num::Tape& tape, std::span<const std::vector<std::uint32_t>> visit_codes) const;
  PatientEncoding encode(num::Tape& tape, const PatientBatch& batch) const;

  const PatientEncoderConfig& config() const { return config_; }
  std::size_t out_dim() const { return 2 * config_.hidden; }

 private:
  PatientEncoderConfig config_;
  num::Parameter* w_emb_ = nullptr;
  BiLstm rnn_;
  num::Parameter* w_alpha_ = nullptr;
};

}  // namespace d2v::enc
