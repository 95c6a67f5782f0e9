#include "d2v/num/gradcheck.h"

#include <cmath>

#include "d2v/error.h"

namespace d2v::num {

namespace {
double evaluate(const LossFn& f) {
  Tape tape;
  Var loss = f(tape);
  D2V_REQUIRE(loss.value().size() == 1, "finite_diff_check: loss is not scalar");
  return loss.value()[0];
}
}  // namespace

GradCheckResult finite_diff_check(const LossFn& f, ParameterStore& params, double epsilon) {
  D2V_REQUIRE(epsilon >= 1e-7 && epsilon <= 1e-3, "finite_diff_check: epsilon must lie in [1e-7, 1e-3]");

  const double base_a = evaluate(f);
  const double base_b = evaluate(f);
  if (base_a != base_b) throw ContractError("finite_diff_check: loss function is not deterministic");

  params.clear_grads();
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
  }

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Parameter& param = params[p];
    const std::vector<double> analytic =
        param.has_grad() ? param.grad : std::vector<double>(param.value.size(), 0.0);
    for (std::size_t i = 0; i < param.value.size(); ++i) {
      const double orig = param.value[i];
      auto at = [&](double offset) {
        param.value[i] = orig + offset;
        return evaluate(f);
      };
      // Fourth-order central difference; its truncation error is O(epsilon^4).
      const double numeric =
          (8.0 * (at(epsilon) - at(-epsilon)) - (at(2.0 * epsilon) - at(-2.0 * epsilon))) / (12.0 * epsilon);
      param.value[i] = orig;
      const double rel = std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + std::abs(numeric) + 1e-12);
      ++result.entries_checked;
      if (rel > result.max_rel_error || result.worst_param.empty()) {
        result.max_rel_error = std::max(result.max_rel_error, rel);
        if (rel >= result.max_rel_error) {
          result.worst_param = param.name;
          result.worst_index = i;
          result.worst_analytic = analytic[i];
          result.worst_numeric = numeric;
        }
      }
    }
  }
  params.clear_grads();
  return result;
}

}  // namespace d2v::num
