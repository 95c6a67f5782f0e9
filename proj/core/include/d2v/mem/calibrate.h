#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "d2v/eval/metrics.h"

namespace d2v::mem {

struct Thresholds {
  std::array<double, data::kNumBins> value{};
  // A class is active when its threshold splits the validation set; inactive
  // classes are only reachable through the argmax fallback.
  std::array<bool, data::kNumBins> active{};
  bool argmax_only = false;
  std::string warning;
};

// One-vs-rest thresholds on the grid 0.00, 0.01, ..., 1.00 chosen to
// maximize each class's validation F1 (which maximizes the macro-F1 of the
// one-vs-rest decisions); the lowest maximizing threshold wins ties. Falls
// back to argmax when the validation labels hold a single class or no
// class gets an active threshold.
Thresholds calibrate_thresholds(std::span<const eval::ClassProbs> probs, std::span<const int> labels);

// Class with the largest margin p_c - t_c among active classes with
// p_c >= t_c; argmax of the probabilities when none passes.
int decide(const Thresholds& t, const eval::ClassProbs& p);
std::vector<int> decide_all(const Thresholds& t, std::span<const eval::ClassProbs> probs);

}  // namespace d2v::mem
