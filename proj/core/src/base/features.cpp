#include "d2v/base/features.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "d2v/error.h"

namespace d2v::base {

num::Tensor doctor_count_matrix(const data::Corpus& corpus) {
  num::Tensor out = num::Tensor::matrix(corpus.doctors.size(), corpus.vocab.total());
  for (std::size_t d = 0; d < corpus.doctors.size(); ++d) {
    auto row = out.row_span(d);
    for (const auto& p : corpus.doctors[d].patients)
      for (const auto& v : p.visits)
        for (auto c : v.concatenated(corpus.vocab)) row[c] += 1.0;
  }
  return out;
}

TfIdf TfIdf::fit(std::span<const std::vector<std::string>> documents) {
  D2V_REQUIRE(!documents.empty(), "tf-idf: no documents");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    std::vector<std::string> uniq(doc.begin(), doc.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (const auto& t : uniq) ++df[t];
  }
  TfIdf out;
  const double n = static_cast<double>(documents.size());
  for (const auto& [term, count] : df) {
    out.terms_.push_back(term);
    out.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return out;
}

std::vector<double> TfIdf::transform(std::span<const std::string> tokens) const {
  std::vector<double> v(terms_.size(), 0.0);
  for (const auto& t : tokens) {
    auto it = std::lower_bound(terms_.begin(), terms_.end(), t);
    if (it != terms_.end() && *it == t) v[static_cast<std::size_t>(it - terms_.begin())] += 1.0;
  }
  double norm = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] *= idf_[i];
    norm += v[i] * v[i];
  }
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
  }
  return v;
}

num::Tensor trial_tfidf_matrix(const data::Corpus& corpus) {
  std::vector<std::vector<std::string>> docs;
  for (const auto& t : corpus.trials) docs.push_back(t.text_tokens);
  const TfIdf model = TfIdf::fit(docs);
  num::Tensor out = num::Tensor::matrix(docs.size(), model.dim());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto v = model.transform(docs[i]);
    std::copy(v.begin(), v.end(), out.row_span(i).begin());
  }
  return out;
}

std::vector<std::uint32_t> top_codes(const data::Corpus& corpus, std::size_t k) {
  const num::Tensor counts = doctor_count_matrix(corpus);
  std::vector<double> total(corpus.vocab.total(), 0.0);
  for (std::size_t d = 0; d < counts.rows(); ++d)
    for (std::size_t c = 0; c < total.size(); ++c) total[c] += counts.at(d, c);

  // (count, code string, space) per concatenated index.
  struct Entry {
    double count;
    const std::string* code;
    int space;
    std::uint32_t index;
  };
  std::vector<Entry> entries;
  for (auto s : data::kCodeSpaces) {
    const auto off = corpus.vocab.offset(s);
    for (std::size_t i = 0; i < corpus.vocab.size(s); ++i) {
      const auto idx = static_cast<std::uint32_t>(off + i);
      if (total[idx] > 0.0)
        entries.push_back({total[idx], &corpus.vocab.code(s, static_cast<std::uint32_t>(i)), static_cast<int>(s), idx});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.count != b.count) return a.count > b.count;
    return std::tie(*a.code, a.space) < std::tie(*b.code, b.space);
  });
  if (entries.size() > k) entries.resize(k);
  std::vector<std::uint32_t> out;
  for (const auto& e : entries) out.push_back(e.index);
  return out;
}

std::vector<std::vector<std::uint32_t>> doctor_visit_sequence(const data::Corpus& corpus, std::size_t doctor) {
  D2V_REQUIRE(doctor < corpus.doctors.size(), "doctor index out of range");
  const auto& rec = corpus.doctors[doctor];
  std::vector<const data::Visit*> visits;
  for (const auto& p : rec.patients)
    for (const auto& v : p.visits) visits.push_back(&v);
  std::stable_sort(visits.begin(), visits.end(),
                   [](const data::Visit* a, const data::Visit* b) { return a->time_index < b->time_index; });
  std::vector<std::vector<std::uint32_t>> out;
  for (const auto* v : visits) out.push_back(v->concatenated(corpus.vocab));
  return out;
}

}  // namespace d2v::base
