#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "d2v/data/types.h"

namespace d2v::eval {

using ClassProbs = std::array<double, data::kNumBins>;

// Area under the precision-recall curve as sum_k Prec(k) * (Rec(k) - Rec(k-1))
// over distinct score thresholds in descending order; tied scores form one
// step. labels are 0/1. Throws ValidationError when only one label value is
// present.
double pr_auc(std::span<const double> scores, std::span<const int> labels);

struct MacroPrAuc {
  double value = 0.0;
  // One-vs-rest PR-AUC per class; empty for classes absent from the labels
  // (or present for every sample), which the macro average skips.
  std::array<std::optional<double>, data::kNumBins> per_class{};
};

// Macro one-vs-rest PR-AUC with class probabilities as scores. Throws
// ValidationError when no class has both positives and negatives.
MacroPrAuc macro_pr_auc(std::span<const ClassProbs> probs, std::span<const int> classes);

// 1 - SS_res / SS_tot. Throws ValidationError for fewer than 2 samples or
// constant `actual`.
double r2_score(std::span<const double> predicted, std::span<const double> actual);
double mean_squared_error(std::span<const double> predicted, std::span<const double> actual);

struct PrecisionRecall {
  std::array<double, data::kNumBins> precision{};
  std::array<double, data::kNumBins> recall{};
  // Set when the denominator was zero (value reported as 0).
  std::array<bool, data::kNumBins> precision_undefined{};
  std::array<bool, data::kNumBins> recall_undefined{};
  std::array<std::size_t, data::kNumBins> support{};
  // Averages over the classes present in the true labels.
  double macro_precision = 0.0;
  double macro_recall = 0.0;
};

PrecisionRecall precision_recall(std::span<const int> predicted, std::span<const int> actual);

int argmax(const ClassProbs& p);

}  // namespace d2v::eval
