#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "d2v/enc/patient.h"
#include "d2v/enc/text.h"
#include "d2v/enc/trial.h"
#include "d2v/mem/memory.h"
#include "d2v/mem/model.h"

namespace d2v::mem {

struct Doctor2VecConfig {
  std::size_t visit_dim = 128;  // d_h
  std::size_t hidden = 124;     // d_g
  std::size_t query_dim = 64;   // d_q
  std::vector<std::size_t> categorical_layers{128, 256, 128, 64};
  std::vector<std::size_t> memory_layers{128, 128, 64};
  std::size_t text_dim = 768;
  std::string text_mode = "hashed";
  std::string embedding_file;
  std::size_t k_max = 32;
  bool identity_generalization = false;
  int generalization_passes = 1;
  // L2 penalty on the input kernels of the patient Bi-LSTM (0 disables).
  double lstm_l2 = 0.0;
  std::uint64_t seed = 1;
};

void to_json(nlohmann::json& j, const Doctor2VecConfig& c);
void from_json(const nlohmann::json& j, Doctor2VecConfig& c);

class Doctor2Vec final : public Model {
 public:
  // `embedder` overrides the one described by config.text_mode.
  Doctor2Vec(const data::Corpus& corpus, const Doctor2VecConfig& config,
             std::shared_ptr<const enc::TextEmbedder> embedder = nullptr);

  std::string kind() const override { return "doctor2vec"; }
  num::ParameterStore& params() override { return params_; }
  ForwardOutput forward(num::Tape& tape, std::span<const Pair> pairs) const override;
  nlohmann::json config() const override;
  std::optional<num::Var> regularizer(num::Tape& tape) const override;

  const Doctor2VecConfig& settings() const { return config_; }
  const enc::PatientEncoder& patient_encoder() const { return patients_; }
  const enc::TrialEncoder& trial_encoder() const { return trials_; }
  const MemoryNetwork& memory() const { return memory_; }
  // Patients (indices into the doctor record) that form the doctor's memory.
  const std::vector<std::size_t>& memory_patients(std::size_t doctor) const { return selected_[doctor]; }

 private:
  const data::Corpus& corpus_;
  Doctor2VecConfig config_;
  num::ParameterStore params_;
  enc::PatientEncoder patients_;
  enc::TrialEncoder trials_;
  MemoryNetwork memory_;
  enc::Linear head_;
  enc::Linear regression_;
  std::vector<num::Parameter*> lstm_kernels_;

  std::vector<std::vector<std::size_t>> selected_;
  std::vector<std::vector<std::vector<std::uint32_t>>> visit_codes_;  // [doctor][selected visit]
  std::vector<std::vector<std::size_t>> visit_offsets_;              // [doctor] per selected patient
  num::Tensor onehots_;
  num::Tensor texts_;
  std::size_t static_dim_ = 0;
};

}  // namespace d2v::mem
