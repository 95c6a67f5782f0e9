#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "d2v/data/types.h"
#include "d2v/mem/doctor2vec.h"
#include "d2v/num/gradcheck.h"

// Checks shared by the unit tests and the acceptance runner.
namespace d2v::testing {

// Names accepted by check_primitive().
const std::vector<std::string>& primitive_names();

// Gradient check of one primitive on random inputs drawn from `seed`.
num::GradCheckResult check_primitive(const std::string& op, std::uint64_t seed);

// Exhaustive-threshold PR-AUC: for every distinct score t (descending) the
// samples with score >= t are counted from scratch.
double brute_force_pr_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Two-pass reference formulas (mean first, then sums of squares).
double two_pass_r2(const std::vector<double>& predicted, const std::vector<double>& actual);
double two_pass_mse(const std::vector<double>& predicted, const std::vector<double>& actual);

// Memory-network invariants over random banks built from `seed`.
struct MemoryInvariantReport {
  double attention_sum_error = 0.0;  // max |sum_k A_k - 1|
  double bound_violation = 0.0;      // max distance of Doc_emb outside the row-wise box
  double min_attention = 1.0;
};
MemoryInvariantReport check_memory_invariants(std::uint64_t seed, bool identity_generalization);

// Max difference of (A, Doc_emb) between a doctor and the same doctor with
// its patients permuted, identity generalization.
double memory_permutation_error(std::uint64_t seed);

// Hand-built bank with rows aligned to two different queries; true when the
// most attended row differs between the queries.
bool memory_argmax_flips();

// Two doctors, two trials, four samples over a 4/2/3 code vocabulary.
data::Corpus toy_corpus();

// Doctor2Vec with every dimension shrunk to a few units.
mem::Doctor2VecConfig toy_doctor2vec_config(std::uint64_t seed = 1);

// Finite-difference check of the joint loss over all four toy pairs with
// respect to every Doctor2Vec parameter.
num::GradCheckResult check_doctor2vec_gradient(std::uint64_t seed = 1);

}  // namespace d2v::testing
