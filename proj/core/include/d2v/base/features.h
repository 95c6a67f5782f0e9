#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "d2v/data/types.h"
#include "d2v/num/tensor.h"

namespace d2v::base {

// Per-doctor code counts over the concatenated (dx, px, rx) vocabulary,
// summed over every visit of every patient. [doctors, vocab.total()]
num::Tensor doctor_count_matrix(const data::Corpus& corpus);

// Term-frequency x inverse-document-frequency over trial text tokens.
// tf is the raw count of a term in the document,
// idf(t) = ln((1 + N) / (1 + df(t))) + 1 with N documents, and each
// document vector is L2-normalized. Terms are ordered lexicographically.
class TfIdf {
 public:
  TfIdf() = default;
  static TfIdf fit(std::span<const std::vector<std::string>> documents);
  // Unknown terms are ignored; a document with no known term maps to zeros.
  std::vector<double> transform(std::span<const std::string> tokens) const;

  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }
  std::size_t dim() const { return terms_.size(); }

 private:
  std::vector<std::string> terms_;
  std::vector<double> idf_;
};

// Fits on the text of every trial in the corpus and returns the trial
// vectors, [trials, terms].
num::Tensor trial_tfidf_matrix(const data::Corpus& corpus);

// Indices into the concatenated vocabulary of the k codes with the largest
// total count across the corpus, most frequent first. Equal counts are
// ordered by code string, then by code space. Returns every code that
// occurs when fewer than k do.
std::vector<std::uint32_t> top_codes(const data::Corpus& corpus, std::size_t k);

// All of a doctor's visits as concatenated code lists, ordered by visit time
// with patient order, then visit order, breaking ties.
std::vector<std::vector<std::uint32_t>> doctor_visit_sequence(const data::Corpus& corpus, std::size_t doctor);

}  // namespace d2v::base
