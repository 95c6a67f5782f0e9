#pragma once

#include <cstdint>
#include <vector>

#include "d2v/num/tensor.h"

namespace d2v::num {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Per-epoch multiplicative decay: lr <- lr * (1 - decay) at each epoch end.
  double decay = 0.02;
};

// Adam with bias correction. Moment buffers are allocated lazily to match the
// parameter store the first time step() runs.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config), lr_(config.learning_rate) {}

  // Requires every parameter to carry a gradient; zeroes gradients afterwards.
  void step(ParameterStore& params);
  void end_epoch() { lr_ *= (1.0 - config_.decay); }

  std::uint64_t steps() const { return step_; }
  double learning_rate() const { return lr_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  double lr_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace d2v::num
