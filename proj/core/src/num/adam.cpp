#include "d2v/num/adam.h"

#include <cmath>

#include "d2v/error.h"

namespace d2v::num {

void Adam::step(ParameterStore& params) {
  if (m_.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.emplace_back(params[i].value.size(), 0.0);
      v_.emplace_back(params[i].value.size(), 0.0);
    }
  }
  D2V_REQUIRE(m_.size() == params.size(), "Adam: parameter store changed since the first step");
  for (std::size_t i = 0; i < params.size(); ++i) {
    D2V_REQUIRE(params[i].has_grad(), "Adam: parameter '" + params[i].name + "' has no gradient");
    D2V_REQUIRE(m_[i].size() == params[i].value.size(), "Adam: shape of '" + params[i].name + "' changed");
  }

  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& m = m_[i];
    auto& v = v_[i];
    double* w = p.value.data();
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double g = p.grad[k];
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= lr_ * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
    p.zero_grad();
  }
}

}  // namespace d2v::num
