#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "d2v/num/tape.h"
#include "d2v/num/tensor.h"

namespace d2v::num {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Builds a scalar loss on the given tape from the current parameter values.
using LossFn = std::function<Var(Tape&)>;

// Compares tape gradients against central differences for every entry of
// every parameter in `params`. Relative error per entry is
// |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
// Throws ContractError if two evaluations at identical parameters differ.
GradCheckResult finite_diff_check(const LossFn& f, ParameterStore& params, double epsilon = 1e-6);

}  // namespace d2v::num
