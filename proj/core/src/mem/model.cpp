#include "d2v/mem/model.h"

#include <algorithm>
#include <numeric>

#include "d2v/error.h"

namespace d2v::mem {

std::vector<Pair> pairs_of(const data::Corpus& corpus, std::span<const std::size_t> sample_indices) {
  std::vector<Pair> out;
  out.reserve(sample_indices.size());
  for (auto i : sample_indices) {
    const auto& s = corpus.samples.at(i);
    out.push_back({s.doctor, s.trial});
  }
  return out;
}

Predictions predict(const Model& model, std::span<const Pair> pairs, std::size_t chunk) {
  D2V_REQUIRE(chunk > 0, "predict: chunk must be positive");
  Predictions out;
  out.probs.reserve(pairs.size());
  out.rate.reserve(pairs.size());
  for (std::size_t start = 0; start < pairs.size(); start += chunk) {
    const auto n = std::min(chunk, pairs.size() - start);
    num::Tape tape;
    const auto f = model.forward(tape, pairs.subspan(start, n));
    const auto& p = f.probs.value();
    const auto& r = f.rate.value();
    for (std::size_t i = 0; i < n; ++i) {
      eval::ClassProbs row{};
      for (int c = 0; c < data::kNumBins; ++c) row[c] = p.at(i, c);
      out.probs.push_back(row);
      out.rate.push_back(r[i]);
    }
  }
  return out;
}

std::vector<std::size_t> recent_patients(const data::DoctorRecord& doctor, std::size_t k_max) {
  D2V_REQUIRE(k_max > 0, "k_max must be positive");
  std::vector<std::size_t> idx(doctor.patients.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return doctor.patients[a].last_time() < doctor.patients[b].last_time();
  });
  if (idx.size() > k_max) idx.erase(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(k_max));
  return idx;
}

}  // namespace d2v::mem
