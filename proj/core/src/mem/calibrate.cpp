#include "d2v/mem/calibrate.h"

#include <set>

#include "d2v/error.h"

namespace d2v::mem {

Thresholds calibrate_thresholds(std::span<const eval::ClassProbs> probs, std::span<const int> labels) {
  D2V_REQUIRE(!probs.empty() && probs.size() == labels.size(), "calibrate_thresholds: bad validation set");
  Thresholds out;
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    out.argmax_only = true;
    out.warning = "validation set holds a single class; using argmax decisions";
    return out;
  }
  for (int c = 0; c < data::kNumBins; ++c) {
    std::size_t positives = 0;
    for (int y : labels) positives += y == c;
    if (positives == 0) continue;
    double best_f1 = -1.0;
    int best_k = 0;
    std::size_t best_pass = 0;
    for (int k = 0; k <= 100; ++k) {
      const double t = k / 100.0;
      std::size_t tp = 0, pass = 0;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i][c] >= t) {
          ++pass;
          tp += labels[i] == c;
        }
      }
      const double f1 = pass == 0 ? 0.0 : 2.0 * tp / static_cast<double>(pass + positives);
      if (f1 > best_f1) {
        best_f1 = f1;
        best_k = k;
        best_pass = pass;
      }
    }
    out.value[c] = best_k / 100.0;
    out.active[c] = best_f1 > 0.0 && best_pass > 0 && best_pass < probs.size();
  }
  bool any = false;
  for (bool a : out.active) any = any || a;
  if (!any) {
    out.argmax_only = true;
    out.warning = "no class threshold separates the validation set; using argmax decisions";
  }
  return out;
}

int decide(const Thresholds& t, const eval::ClassProbs& p) {
  if (!t.argmax_only) {
    int best = -1;
    double margin = 0.0;
    for (int c = 0; c < data::kNumBins; ++c) {
      if (!t.active[c] || p[c] < t.value[c]) continue;
      const double m = p[c] - t.value[c];
      if (best < 0 || m > margin) {
        best = c;
        margin = m;
      }
    }
    if (best >= 0) return best;
  }
  return eval::argmax(p);
}

std::vector<int> decide_all(const Thresholds& t, std::span<const eval::ClassProbs> probs) {
  std::vector<int> out;
  out.reserve(probs.size());
  for (const auto& p : probs) out.push_back(decide(t, p));
  return out;
}

}  // namespace d2v::mem
