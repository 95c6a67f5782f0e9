#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "d2v/data/types.h"

namespace d2v::syn {

struct IntRange {
  int lo = 1;
  int hi = 1;
};

struct GenConfig {
  int n_doctors = 200;
  int n_trials = 50;
  IntRange patients_per_doctor{4, 8};
  IntRange visits_per_patient{2, 4};
  IntRange investigators_per_trial{30, 50};
  // |D|, |P|, |M|
  std::array<int, 3> vocab_sizes{400, 120, 400};
  // Poisson means and truncation maxima for per-visit code counts.
  std::array<double, 3> mean_codes{4.23, 1.23, 9.36};
  std::array<int, 3> max_codes{56, 18, 100};
  int n_topics = 4;
  // The last n_rare_topics topics (at most n_topics - 1) are tagged
  // prevalence=rare and get half the trial weight.
  int n_rare_topics = 1;
  double noise_std = 0.05;
  std::uint64_t seed = 7;
  std::array<double, 5> target_bin_distribution{0.12, 0.33, 0.37, 0.12, 0.06};
  double calibration_tolerance = 0.05;
  int max_retries = 20;
  // Share of each visit's codes drawn from the topic-free background.
  double background_weight = 0.5;
  // Fraction of each space's vocabulary reserved for background codes.
  double background_fraction = 0.1;
  // Dirichlet concentration of doctor topic mixtures (per topic).
  double doctor_concentration = 2.0;
  // Patient mixture ~ Dirichlet(patient_concentration * doctor mixture).
  double patient_concentration = 2.0;
  std::vector<std::string> countries{"US"};
  std::vector<double> country_weights{1.0};

  // Throws ValidationError on inconsistent values.
  void validate() const;
};

// Planted generative structure. Probability vectors are dense over each
// code space.
struct TopicModel {
  // [space][topic] -> distribution over that space's codes.
  std::array<std::vector<std::vector<double>>, 3> topic_code_probs;
  // [space] -> background distribution.
  std::array<std::vector<double>, 3> background_probs;
  std::vector<std::vector<double>> doctor_mixtures;
  std::vector<std::vector<double>> trial_topics;
};

struct GeneratedCorpus {
  data::Corpus corpus;
  TopicModel topics;
  std::array<double, 5> achieved_bin_distribution{};
  int attempts = 0;
};

GeneratedCorpus generate(const GenConfig& config);
inline data::Corpus generate_corpus(const GenConfig& config) { return generate(config).corpus; }

// Cosine similarity of two nonnegative topic vectors, clamped to [0,1]
// (orthogonal -> 0, parallel -> 1).
double topic_affinity(std::span<const double> doctor_mixture, std::span<const double> trial_topic);

// Ground-truth affinity for a doctor/trial pair of a generated corpus.
// Throws ValidationError when either id is not part of `corpus` or carries
// no planted topics.
double planted_affinity(const data::Corpus& corpus, const std::string& doctor_id, const std::string& trial_id);

// Empirical share of samples per bin.
std::array<double, 5> bin_distribution(const data::Corpus& corpus);

// Area names used for the therapeutic-area field.
std::string topic_name(int topic);

}  // namespace d2v::syn
