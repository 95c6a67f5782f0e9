#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace d2v::data {

enum class CodeSpace { kDiagnosis = 0, kProcedure = 1, kMedication = 2 };
inline constexpr std::array<CodeSpace, 3> kCodeSpaces = {CodeSpace::kDiagnosis, CodeSpace::kProcedure,
                                                         CodeSpace::kMedication};
const char* code_space_name(CodeSpace s);

// Three disjoint code namespaces with dense, stable indices. Visit vectors
// are concatenated in (diagnosis, procedure, medication) order.
class CodeVocabulary {
 public:
  CodeVocabulary() = default;
  CodeVocabulary(std::vector<std::string> diagnosis, std::vector<std::string> procedure,
                 std::vector<std::string> medication);

  std::size_t size(CodeSpace s) const { return codes_[static_cast<int>(s)].size(); }
  std::size_t total() const { return size(CodeSpace::kDiagnosis) + size(CodeSpace::kProcedure) + size(CodeSpace::kMedication); }
  // Position of the first code of `s` in the concatenated visit vector.
  std::size_t offset(CodeSpace s) const;

  const std::vector<std::string>& codes(CodeSpace s) const { return codes_[static_cast<int>(s)]; }
  const std::string& code(CodeSpace s, std::uint32_t index) const;
  std::optional<std::uint32_t> index(CodeSpace s, const std::string& code) const;

 private:
  std::array<std::vector<std::string>, 3> codes_;
  std::array<std::map<std::string, std::uint32_t>, 3> lookup_;
};

// One encounter. Multi-hot vectors are stored as sorted, duplicate-free
// index lists into the matching vocabulary space.
struct Visit {
  std::vector<std::uint32_t> diagnosis;
  std::vector<std::uint32_t> procedure;
  std::vector<std::uint32_t> medication;
  std::uint32_t time_index = 0;

  const std::vector<std::uint32_t>& codes(CodeSpace s) const;
  std::size_t code_count() const { return diagnosis.size() + procedure.size() + medication.size(); }
  // Indices into the concatenated (dx, px, rx) visit vector.
  std::vector<std::uint32_t> concatenated(const CodeVocabulary& vocab) const;
};

struct Patient {
  std::vector<Visit> visits;
  std::uint32_t last_time() const { return visits.empty() ? 0 : visits.back().time_index; }
};

struct DoctorRecord {
  std::string id;
  std::string country;
  std::vector<Patient> patients;
  std::vector<double> static_features;
  // Ground-truth topic mixture from the synthetic generator; empty for real data.
  std::vector<double> planted_topics;
};

struct CategoryField {
  std::string name;
  std::vector<std::string> values;
  std::optional<std::uint32_t> index(const std::string& value) const;
};

struct RawEnrollment {
  std::string doctor_id;
  int randomized = 0;
  int discontinued = 0;
  double window = 1.0;
};

struct Trial {
  std::string id;
  // One value index per category field; each is the hot position of that
  // field's one-hot vector.
  std::vector<std::uint32_t> categorical;
  std::vector<std::string> text_tokens;
  std::vector<RawEnrollment> enrollments;
  std::vector<double> planted_topics;
};

inline constexpr int kNumBins = 5;

struct EnrollmentLabel {
  double raw_rate = 0.0;
  double normalized_rate = 0.0;
  int bin = 0;
};

struct Sample {
  std::string doctor_id;
  std::string trial_id;
  EnrollmentLabel label;
  // Resolved positions in the owning corpus.
  std::size_t doctor = 0;
  std::size_t trial = 0;
};

struct CorpusHeader {
  int format_version = 1;
  std::uint64_t seed = 0;
};

class Corpus {
 public:
  CorpusHeader header;
  CodeVocabulary vocab;
  std::vector<CategoryField> categories;
  std::vector<std::string> static_feature_names;
  std::vector<DoctorRecord> doctors;
  std::vector<Trial> trials;
  std::vector<Sample> samples;

  // Rebuilds id lookups and sample positions. Throws ValidationError on
  // dangling ids or duplicates.
  void reindex();
  // Checks every datamodel invariant; throws ValidationError naming the first violation.
  void validate() const;

  std::size_t doctor_index(const std::string& id) const;
  std::size_t trial_index(const std::string& id) const;
  bool has_doctor(const std::string& id) const { return doctor_lookup_.count(id) > 0; }
  bool has_trial(const std::string& id) const { return trial_lookup_.count(id) > 0; }
  std::size_t category_index(const std::string& field) const;
  std::size_t categorical_width() const;
  std::size_t patient_count() const;
  // Value label of a trial's categorical field.
  const std::string& category_value(const Trial& t, const std::string& field) const;

 private:
  std::map<std::string, std::size_t> doctor_lookup_;
  std::map<std::string, std::size_t> trial_lookup_;
};

}  // namespace d2v::data
