#include "d2v/data/types.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "d2v/data/labels.h"
#include "d2v/error.h"

namespace d2v::data {

const char* code_space_name(CodeSpace s) {
  switch (s) {
    case CodeSpace::kDiagnosis:
      return "diagnosis";
    case CodeSpace::kProcedure:
      return "procedure";
    case CodeSpace::kMedication:
      return "medication";
  }
  return "?";
}

CodeVocabulary::CodeVocabulary(std::vector<std::string> diagnosis, std::vector<std::string> procedure,
                               std::vector<std::string> medication)
    : codes_{std::move(diagnosis), std::move(procedure), std::move(medication)} {
  for (int s = 0; s < 3; ++s) {
    for (std::uint32_t i = 0; i < codes_[s].size(); ++i) {
      if (!lookup_[s].emplace(codes_[s][i], i).second)
        throw ValidationError(std::string("duplicate ") + code_space_name(static_cast<CodeSpace>(s)) +
                              " code: " + codes_[s][i]);
    }
  }
}

std::size_t CodeVocabulary::offset(CodeSpace s) const {
  switch (s) {
    case CodeSpace::kDiagnosis:
      return 0;
    case CodeSpace::kProcedure:
      return size(CodeSpace::kDiagnosis);
    case CodeSpace::kMedication:
      return size(CodeSpace::kDiagnosis) + size(CodeSpace::kProcedure);
  }
  return 0;
}

const std::string& CodeVocabulary::code(CodeSpace s, std::uint32_t index) const {
  const auto& c = codes_[static_cast<int>(s)];
  if (index >= c.size()) throw ValidationError("code index out of range");
  return c[index];
}

std::optional<std::uint32_t> CodeVocabulary::index(CodeSpace s, const std::string& code) const {
  const auto& m = lookup_[static_cast<int>(s)];
  auto it = m.find(code);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::uint32_t>& Visit::codes(CodeSpace s) const {
  switch (s) {
    case CodeSpace::kDiagnosis:
      return diagnosis;
    case CodeSpace::kProcedure:
      return procedure;
    case CodeSpace::kMedication:
      return medication;
  }
  return diagnosis;
}

std::vector<std::uint32_t> Visit::concatenated(const CodeVocabulary& vocab) const {
  std::vector<std::uint32_t> out;
  out.reserve(code_count());
  for (auto s : kCodeSpaces) {
    const auto off = static_cast<std::uint32_t>(vocab.offset(s));
    for (auto c : codes(s)) out.push_back(off + c);
  }
  return out;
}

std::optional<std::uint32_t> CategoryField::index(const std::string& value) const {
  auto it = std::find(values.begin(), values.end(), value);
  if (it == values.end()) return std::nullopt;
  return static_cast<std::uint32_t>(it - values.begin());
}

void Corpus::reindex() {
  doctor_lookup_.clear();
  trial_lookup_.clear();
  for (std::size_t i = 0; i < doctors.size(); ++i)
    if (!doctor_lookup_.emplace(doctors[i].id, i).second)
      throw ValidationError("duplicate doctor id: " + doctors[i].id);
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (!trial_lookup_.emplace(trials[i].id, i).second) throw ValidationError("duplicate trial id: " + trials[i].id);
  for (auto& s : samples) {
    s.doctor = doctor_index(s.doctor_id);
    s.trial = trial_index(s.trial_id);
  }
}

std::size_t Corpus::doctor_index(const std::string& id) const {
  auto it = doctor_lookup_.find(id);
  if (it == doctor_lookup_.end()) throw ValidationError("unknown doctor id: " + id);
  return it->second;
}

std::size_t Corpus::trial_index(const std::string& id) const {
  auto it = trial_lookup_.find(id);
  if (it == trial_lookup_.end()) throw ValidationError("unknown trial id: " + id);
  return it->second;
}

std::size_t Corpus::category_index(const std::string& field) const {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (categories[i].name == field) return i;
  throw ValidationError("unknown categorical field: " + field);
}

std::size_t Corpus::categorical_width() const {
  std::size_t w = 0;
  for (const auto& c : categories) w += c.values.size();
  return w;
}

std::size_t Corpus::patient_count() const {
  std::size_t n = 0;
  for (const auto& d : doctors) n += d.patients.size();
  return n;
}

const std::string& Corpus::category_value(const Trial& t, const std::string& field) const {
  const auto f = category_index(field);
  return categories[f].values.at(t.categorical.at(f));
}

namespace {

void validate_visit(const Visit& v, const CodeVocabulary& vocab, const std::string& where) {
  if (v.code_count() == 0) throw ValidationError(where + ": visit has no codes");
  for (auto s : kCodeSpaces) {
    const auto& c = v.codes(s);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i] >= vocab.size(s))
        throw ValidationError(where + ": " + code_space_name(s) + " index out of vocabulary range");
      if (i > 0 && c[i] <= c[i - 1])
        throw ValidationError(where + ": " + code_space_name(s) + " indices not strictly increasing");
    }
  }
}

}  // namespace

void Corpus::validate() const {
  if (header.format_version != 1) throw ValidationError("unsupported corpus format_version");
  const std::size_t nstatic = static_feature_names.size();
  for (const auto& d : doctors) {
    if (d.patients.empty()) throw ValidationError("doctor " + d.id + " has no patients");
    if (d.static_features.size() != nstatic)
      throw ValidationError("doctor " + d.id + " static feature length mismatch");
    for (double x : d.static_features)
      if (!std::isfinite(x)) throw ValidationError("doctor " + d.id + " has non-finite static feature");
    for (std::size_t k = 0; k < d.patients.size(); ++k) {
      const auto& p = d.patients[k];
      const std::string where = "doctor " + d.id + " patient " + std::to_string(k);
      if (p.visits.empty()) throw ValidationError(where + " has no visits");
      for (std::size_t t = 0; t < p.visits.size(); ++t) {
        validate_visit(p.visits[t], vocab, where);
        if (t > 0 && p.visits[t].time_index <= p.visits[t - 1].time_index)
          throw ValidationError(where + ": visit time_index not strictly increasing");
      }
    }
  }
  for (const auto& t : trials) {
    if (t.categorical.size() != categories.size())
      throw ValidationError("trial " + t.id + " categorical field count mismatch");
    for (std::size_t f = 0; f < categories.size(); ++f)
      if (t.categorical[f] >= categories[f].values.size())
        throw ValidationError("trial " + t.id + " has unknown value for category " + categories[f].name);
    if (t.text_tokens.empty()) throw ValidationError("trial " + t.id + " has empty text");
    if (t.enrollments.empty()) throw ValidationError("trial " + t.id + " has no investigators");
    std::set<std::string> seen;
    for (const auto& e : t.enrollments) {
      if (!has_doctor(e.doctor_id)) throw ValidationError("trial " + t.id + " references unknown doctor " + e.doctor_id);
      if (!seen.insert(e.doctor_id).second) throw ValidationError("trial " + t.id + " lists doctor twice: " + e.doctor_id);
      compute_enrollment_rate(e.randomized, e.discontinued, e.window);
    }
  }
  for (const auto& s : samples) {
    if (!has_doctor(s.doctor_id) || !has_trial(s.trial_id))
      throw ValidationError("sample references unknown entity: " + s.doctor_id + "/" + s.trial_id);
    const auto& l = s.label;
    if (!(l.normalized_rate >= 0.0 && l.normalized_rate <= 1.0) || l.raw_rate < 0.0)
      throw ValidationError("sample label out of range: " + s.doctor_id + "/" + s.trial_id);
    if (bin_rate(l.normalized_rate) != l.bin)
      throw ValidationError("sample bin inconsistent with normalized rate: " + s.doctor_id + "/" + s.trial_id);
  }
}

}  // namespace d2v::data
