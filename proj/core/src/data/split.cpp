#include "d2v/data/split.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "d2v/error.h"

namespace d2v::data {

namespace {

void shuffle(std::vector<std::size_t>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

void assign(const Corpus& corpus, const std::vector<std::size_t>& trials, std::vector<std::size_t>& samples,
            std::vector<std::string>& ids) {
  std::set<std::size_t> owned(trials.begin(), trials.end());
  for (std::size_t i = 0; i < corpus.samples.size(); ++i)
    if (owned.count(corpus.samples[i].trial)) samples.push_back(i);
  for (auto t : owned) ids.push_back(corpus.trials[t].id);
}

}  // namespace

Split split_trial_disjoint(const Corpus& corpus, std::array<double, 3> ratios, std::uint64_t seed) {
  const std::size_t n = corpus.trials.size();
  if (n < 10) throw ValidationError("split needs at least 10 trials, corpus has " + std::to_string(n));
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (!(ratios[0] > 0 && ratios[1] > 0 && ratios[2] > 0) || std::abs(total - 1.0) > 1e-9)
    throw ValidationError("split ratios must be positive and sum to 1");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, seed);

  auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  auto n_test = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 2);
  n_test = std::clamp<std::size_t>(n_test, 1, n - n_train - 1);

  const std::vector<std::size_t> tr(order.begin(), order.begin() + static_cast<long>(n_train));
  const std::vector<std::size_t> te(order.begin() + static_cast<long>(n_train),
                                    order.begin() + static_cast<long>(n_train + n_test));
  const std::vector<std::size_t> va(order.begin() + static_cast<long>(n_train + n_test), order.end());

  Split s;
  assign(corpus, tr, s.train, s.train_trials);
  assign(corpus, te, s.test, s.test_trials);
  assign(corpus, va, s.validation, s.validation_trials);
  return s;
}

Split split_trials(const Corpus& corpus, const std::vector<std::size_t>& trial_indices, double train_fraction,
                   std::uint64_t seed) {
  if (trial_indices.size() < 2) throw ValidationError("need at least 2 trials for a train/validation split");
  std::vector<std::size_t> order = trial_indices;
  std::sort(order.begin(), order.end());
  shuffle(order, seed);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(order.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, order.size() - 1);
  const std::vector<std::size_t> tr(order.begin(), order.begin() + static_cast<long>(n_train));
  const std::vector<std::size_t> va(order.begin() + static_cast<long>(n_train), order.end());
  Split s;
  assign(corpus, tr, s.train, s.train_trials);
  assign(corpus, va, s.validation, s.validation_trials);
  return s;
}

std::vector<std::size_t> samples_of_trials(const Corpus& corpus, const std::vector<std::size_t>& trial_indices) {
  std::vector<std::size_t> out;
  std::vector<std::string> ids;
  assign(corpus, trial_indices, out, ids);
  return out;
}

}  // namespace d2v::data
