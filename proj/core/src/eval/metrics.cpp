#include "d2v/eval/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "d2v/error.h"

namespace d2v::eval {

double pr_auc(std::span<const double> scores, std::span<const int> labels) {
  D2V_REQUIRE(scores.size() == labels.size(), "pr_auc: scores and labels differ in length");
  std::size_t positives = 0;
  for (int y : labels) {
    D2V_REQUIRE(y == 0 || y == 1, "pr_auc: labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  if (positives == 0) throw ValidationError("pr_auc: degenerate labels, every sample is negative");
  if (positives == labels.size()) throw ValidationError("pr_auc: degenerate labels, every sample is positive");
  for (double s : scores)
    if (!std::isfinite(s)) throw ValidationError("pr_auc: non-finite score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double area = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      tp += static_cast<std::size_t>(labels[order[i]]);
      ++seen;
      ++i;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    area += precision * (recall - prev_recall);
    prev_recall = recall;
  }
  return area;
}

MacroPrAuc macro_pr_auc(std::span<const ClassProbs> probs, std::span<const int> classes) {
  D2V_REQUIRE(probs.size() == classes.size(), "macro_pr_auc: length mismatch");
  MacroPrAuc out;
  double total = 0.0;
  int used = 0;
  std::vector<double> scores(probs.size());
  std::vector<int> labels(probs.size());
  for (int c = 0; c < data::kNumBins; ++c) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      scores[i] = probs[i][c];
      labels[i] = classes[i] == c ? 1 : 0;
      pos += static_cast<std::size_t>(labels[i]);
    }
    if (pos == 0 || pos == probs.size()) continue;
    out.per_class[c] = pr_auc(scores, labels);
    total += *out.per_class[c];
    ++used;
  }
  if (used == 0) throw ValidationError("macro_pr_auc: no class has both positive and negative samples");
  out.value = total / used;
  return out;
}

double r2_score(std::span<const double> predicted, std::span<const double> actual) {
  D2V_REQUIRE(predicted.size() == actual.size(), "r2_score: length mismatch");
  if (actual.size() < 2) throw ValidationError("r2_score: needs at least two samples");
  const double mean = std::accumulate(actual.begin(), actual.end(), 0.0) / static_cast<double>(actual.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
  }
  if (ss_tot == 0.0) throw ValidationError("r2_score: actual values have zero variance");
  return 1.0 - ss_res / ss_tot;
}

double mean_squared_error(std::span<const double> predicted, std::span<const double> actual) {
  D2V_REQUIRE(predicted.size() == actual.size() && !actual.empty(), "mean_squared_error: bad lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) s += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
  return s / static_cast<double>(actual.size());
}

PrecisionRecall precision_recall(std::span<const int> predicted, std::span<const int> actual) {
  D2V_REQUIRE(predicted.size() == actual.size() && !actual.empty(), "precision_recall: bad lengths");
  std::array<std::size_t, data::kNumBins> tp{}, pred_count{};
  PrecisionRecall out;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    D2V_REQUIRE(actual[i] >= 0 && actual[i] < data::kNumBins && predicted[i] >= 0 && predicted[i] < data::kNumBins,
                "precision_recall: class out of range");
    ++out.support[actual[i]];
    ++pred_count[predicted[i]];
    if (predicted[i] == actual[i]) ++tp[actual[i]];
  }
  int present = 0;
  for (int c = 0; c < data::kNumBins; ++c) {
    out.precision_undefined[c] = pred_count[c] == 0;
    out.recall_undefined[c] = out.support[c] == 0;
    out.precision[c] = pred_count[c] ? static_cast<double>(tp[c]) / pred_count[c] : 0.0;
    out.recall[c] = out.support[c] ? static_cast<double>(tp[c]) / out.support[c] : 0.0;
    if (out.support[c]) {
      ++present;
      out.macro_precision += out.precision[c];
      out.macro_recall += out.recall[c];
    }
  }
  out.macro_precision /= present;
  out.macro_recall /= present;
  return out;
}

int argmax(const ClassProbs& p) { return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()); }

}  // namespace d2v::eval
