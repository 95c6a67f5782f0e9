#include "d2v/mem/memory.h"

#include "d2v/error.h"

namespace d2v::mem {

using num::Tape;
using num::Var;

MemoryNetwork::MemoryNetwork(num::ParameterStore& store, const MemoryConfig& config, std::mt19937_64& rng,
                             const std::string& prefix)
    : config_(config) {
  D2V_REQUIRE(!config.layers.empty(), "memory MLP needs at least one layer");
  D2V_REQUIRE(config.generalization_passes >= 1, "generalization_passes must be at least 1");
  input_ = enc::Mlp(store, prefix + ".input", config.input_dim, config.layers, rng);
  const std::size_t dm = config.layers.back();
  if (!config.identity_generalization) generalize_ = enc::Lstm(store, prefix + ".generalize", dm, dm, rng);
  query_proj_ = enc::Linear(store, prefix + ".w_q", config.query_dim, dm, rng, /*bias=*/false);
}

MemoryBank MemoryNetwork::build(Tape& tape, Var patient_embeddings, std::span<const std::size_t> doctor_offsets) const {
  D2V_REQUIRE(doctor_offsets.size() >= 2 && doctor_offsets.back() == patient_embeddings.rows(),
              "memory: doctor offsets must cover the patient rows");
  for (std::size_t j = 0; j + 1 < doctor_offsets.size(); ++j)
    D2V_REQUIRE(doctor_offsets[j + 1] > doctor_offsets[j], "memory: doctor without patients");
  MemoryBank bank;
  bank.offsets.assign(doctor_offsets.begin(), doctor_offsets.end());
  bank.input = input_(tape, patient_embeddings);
  bank.generalized = bank.input;
  if (!config_.identity_generalization)
    for (int pass = 0; pass < config_.generalization_passes; ++pass)
      bank.generalized = generalize_.run(tape, bank.generalized, bank.offsets);
  return bank;
}

MemoryReadout MemoryNetwork::query(Tape& tape, const MemoryBank& bank, Var queries,
                                   std::span<const std::size_t> doctor_of) const {
  D2V_REQUIRE(queries.rows() == doctor_of.size(), "memory: one doctor per query expected");
  D2V_REQUIRE(queries.cols() == config_.query_dim, "memory: query width mismatch");
  MemoryReadout out;
  std::vector<std::size_t> owner;
  out.offsets.push_back(0);
  for (std::size_t s = 0; s < doctor_of.size(); ++s) {
    const auto j = doctor_of[s];
    D2V_REQUIRE(j < bank.doctors(), "memory: doctor index out of range");
    for (auto r = bank.offsets[j]; r < bank.offsets[j + 1]; ++r) {
      out.rows.push_back(r);
      owner.push_back(s);
    }
    out.offsets.push_back(out.rows.size());
  }
  Var q = query_proj_(tape, queries);
  Var keys = num::gather_rows(bank.generalized, out.rows);
  Var values = num::gather_rows(bank.input, out.rows);
  Var scores = num::row_sum(num::mul(keys, num::gather_rows(q, owner)));
  out.attention = num::segment_softmax(scores, out.offsets);
  out.response = num::segment_weighted_sum(values, out.attention, out.offsets);
  return out;
}

}  // namespace d2v::mem
