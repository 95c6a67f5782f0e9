#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "d2v/data/types.h"

namespace d2v::data {

// Sample indices (into Corpus::samples) per partition, plus the trial ids
// that each partition owns.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::size_t> validation;
  std::vector<std::string> train_trials;
  std::vector<std::string> test_trials;
  std::vector<std::string> validation_trials;
};

// Partitions whole trials into (train, test, validation) according to
// `ratios`. Trial counts are round(r * n) for train and test; validation
// takes the remainder. Requires at least 10 trials.
Split split_trial_disjoint(const Corpus& corpus, std::array<double, 3> ratios, std::uint64_t seed);

// Two-way trial-level split of an explicit trial subset (used by the
// transfer harness for its internal train/validation split).
Split split_trials(const Corpus& corpus, const std::vector<std::size_t>& trial_indices, double train_fraction,
                   std::uint64_t seed);

// Samples whose trial is in `trial_indices`, in corpus order.
std::vector<std::size_t> samples_of_trials(const Corpus& corpus, const std::vector<std::size_t>& trial_indices);

}  // namespace d2v::data
