#pragma once

#include <span>
#include <vector>

#include "d2v/data/types.h"

namespace d2v::data {

// (randomized - discontinued) / window.
double compute_enrollment_rate(int randomized, int discontinued, double window);

// Min-max normalization over one trial's investigators. When every rate is
// equal (including a single investigator) each output is 0.5.
std::vector<double> normalize_rates(std::span<const double> rates);

// Five equal-width bins, left-inclusive; the last bin is closed at 1.0.
int bin_rate(double normalized_rate);

// Labels every enrollment of a trial, in enrollment order.
std::vector<EnrollmentLabel> label_trial(const Trial& trial);

// Rebuilds corpus.samples from the trials' raw enrollments (trial order,
// then enrollment order) and reindexes.
void rebuild_samples(Corpus& corpus);

}  // namespace d2v::data
