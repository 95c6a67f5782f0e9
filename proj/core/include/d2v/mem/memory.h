#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "d2v/enc/layers.h"

namespace d2v::mem {

struct MemoryConfig {
  std::size_t input_dim = 248;  // 2 * d_g
  std::vector<std::size_t> layers{128, 128, 64};  // last width is d_m
  std::size_t query_dim = 64;   // d_q
  bool identity_generalization = false;
  int generalization_passes = 1;
};

// Memory rows of several doctors stacked; doctor j owns rows
// [offsets[j], offsets[j+1]).
struct MemoryBank {
  num::Var input;        // I_f
  num::Var generalized;  // M_d
  std::vector<std::size_t> offsets;
  std::size_t doctors() const { return offsets.size() - 1; }
};

struct MemoryReadout {
  num::Var attention;                // [sum over queries of K, 1]
  num::Var response;                 // Doc_emb, [queries, d_m]
  std::vector<std::size_t> offsets;  // attention segment per query
  std::vector<std::size_t> rows;     // bank row behind each attention entry
};

class MemoryNetwork {
 public:
  MemoryNetwork() = default;
  MemoryNetwork(num::ParameterStore& store, const MemoryConfig& config, std::mt19937_64& rng,
                const std::string& prefix = "memory");

  // I_f = MLP(I(k)) per patient; M_d = per-step outputs of an LSTM run over
  // each doctor's I_f rows (or I_f itself with identity generalization).
  MemoryBank build(num::Tape& tape, num::Var patient_embeddings, std::span<const std::size_t> doctor_offsets) const;

  // For query s addressed to doctor doctor_of[s]:
  //   A = softmax_k((W_q Q_s) . M_d[k]),  Doc_emb = sum_k A_k I_f[k].
  MemoryReadout query(num::Tape& tape, const MemoryBank& bank, num::Var queries,
                      std::span<const std::size_t> doctor_of) const;

  const MemoryConfig& config() const { return config_; }
  std::size_t out_dim() const { return config_.layers.back(); }

 private:
  MemoryConfig config_;
  enc::Mlp input_;
  enc::Lstm generalize_;
  enc::Linear query_proj_;
};

}  // namespace d2v::mem
