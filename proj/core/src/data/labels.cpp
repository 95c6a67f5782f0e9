#include "d2v/data/labels.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "d2v/error.h"

namespace d2v::data {

double compute_enrollment_rate(int randomized, int discontinued, double window) {
  if (!(window > 0.0) || !std::isfinite(window))
    throw ValidationError("enrollment window must be positive, got " + std::to_string(window));
  if (discontinued < 0 || discontinued > randomized)
    throw ValidationError("need randomized >= discontinued >= 0, got randomized=" + std::to_string(randomized) +
                          " discontinued=" + std::to_string(discontinued));
  return static_cast<double>(randomized - discontinued) / window;
}

std::vector<double> normalize_rates(std::span<const double> rates) {
  if (rates.empty()) throw ValidationError("normalize_rates: trial has no investigators");
  const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
  std::vector<double> out(rates.size(), 0.5);
  if (*hi > *lo) {
    const double span = *hi - *lo;
    for (std::size_t i = 0; i < rates.size(); ++i) out[i] = (rates[i] - *lo) / span;
  }
  return out;
}

int bin_rate(double normalized_rate) {
  if (!(normalized_rate >= 0.0 && normalized_rate <= 1.0))
    throw ValidationError("bin_rate: normalized rate out of [0,1]: " + std::to_string(normalized_rate));
  // Compare against the decimal boundaries directly so that 0.2, 0.4, ...
  // land in the upper bin regardless of floor(5*x) rounding.
  static constexpr double kUpper[] = {0.2, 0.4, 0.6, 0.8};
  int bin = 0;
  while (bin < 4 && normalized_rate >= kUpper[bin]) ++bin;
  return bin;
}

std::vector<EnrollmentLabel> label_trial(const Trial& trial) {
  std::vector<double> raw;
  raw.reserve(trial.enrollments.size());
  for (const auto& e : trial.enrollments)
    raw.push_back(compute_enrollment_rate(e.randomized, e.discontinued, e.window));
  const auto norm = normalize_rates(raw);
  std::vector<EnrollmentLabel> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out.push_back({raw[i], norm[i], bin_rate(norm[i])});
  return out;
}

void rebuild_samples(Corpus& corpus) {
  corpus.samples.clear();
  for (const auto& t : corpus.trials) {
    const auto labels = label_trial(t);
    for (std::size_t i = 0; i < labels.size(); ++i)
      corpus.samples.push_back(Sample{t.enrollments[i].doctor_id, t.id, labels[i]});
  }
  corpus.reindex();
}

}  // namespace d2v::data
