#include "d2v/data/corpus_io.h"

#include <fstream>
#include <map>
#include <sstream>

#include "d2v/error.h"
#include <nlohmann/json.hpp>

namespace d2v::data {

using nlohmann::json;

namespace {

json visit_json(const Visit& v) {
  return json{{"t", v.time_index}, {"dx", v.diagnosis}, {"px", v.procedure}, {"rx", v.medication}};
}

Visit visit_from(const json& j) {
  Visit v;
  v.time_index = j.at("t").get<std::uint32_t>();
  v.diagnosis = j.at("dx").get<std::vector<std::uint32_t>>();
  v.procedure = j.at("px").get<std::vector<std::uint32_t>>();
  v.medication = j.at("rx").get<std::vector<std::uint32_t>>();
  return v;
}

CodeSpace space_from(const std::string& s) {
  if (s == "diagnosis") return CodeSpace::kDiagnosis;
  if (s == "procedure") return CodeSpace::kProcedure;
  if (s == "medication") return CodeSpace::kMedication;
  throw FormatError("unknown code space: " + s);
}

}  // namespace

void write_corpus(std::ostream& os, const Corpus& c) {
  json header = {{"kind", "header"},
                 {"format_version", c.header.format_version},
                 {"seed", c.header.seed},
                 {"counts",
                  {{"doctors", c.doctors.size()},
                   {"patients", c.patient_count()},
                   {"trials", c.trials.size()},
                   {"samples", c.samples.size()},
                   {"diagnosis_codes", c.vocab.size(CodeSpace::kDiagnosis)},
                   {"procedure_codes", c.vocab.size(CodeSpace::kProcedure)},
                   {"medication_codes", c.vocab.size(CodeSpace::kMedication)}}}};
  os << header.dump() << '\n';
  for (auto s : kCodeSpaces)
    os << json{{"kind", "vocab"}, {"space", code_space_name(s)}, {"codes", c.vocab.codes(s)}}.dump() << '\n';
  for (const auto& f : c.categories)
    os << json{{"kind", "vocab"}, {"space", "category"}, {"field", f.name}, {"values", f.values}}.dump() << '\n';
  os << json{{"kind", "vocab"}, {"space", "static"}, {"names", c.static_feature_names}}.dump() << '\n';

  for (const auto& d : c.doctors) {
    os << json{{"kind", "doctor"},
               {"id", d.id},
               {"country", d.country},
               {"static", d.static_features},
               {"planted_topics", d.planted_topics}}
              .dump()
       << '\n';
    for (std::size_t k = 0; k < d.patients.size(); ++k) {
      json visits = json::array();
      for (const auto& v : d.patients[k].visits) visits.push_back(visit_json(v));
      os << json{{"kind", "patient"}, {"doctor", d.id}, {"index", k}, {"visits", visits}}.dump() << '\n';
    }
  }
  for (const auto& t : c.trials) {
    json cat = json::object();
    for (std::size_t f = 0; f < c.categories.size(); ++f)
      cat[c.categories[f].name] = c.categories[f].values.at(t.categorical.at(f));
    json enr = json::array();
    for (const auto& e : t.enrollments)
      enr.push_back({{"doctor", e.doctor_id},
                     {"randomized", e.randomized},
                     {"discontinued", e.discontinued},
                     {"window", e.window}});
    os << json{{"kind", "trial"},
               {"id", t.id},
               {"categorical", cat},
               {"tokens", t.text_tokens},
               {"enrollments", enr},
               {"planted_topics", t.planted_topics}}
              .dump()
       << '\n';
  }
  for (const auto& s : c.samples)
    os << json{{"kind", "sample"},
               {"doctor", s.doctor_id},
               {"trial", s.trial_id},
               {"raw_rate", s.label.raw_rate},
               {"normalized_rate", s.label.normalized_rate},
               {"bin", s.label.bin}}
              .dump()
       << '\n';
}

std::string corpus_to_string(const Corpus& corpus) {
  std::ostringstream os;
  write_corpus(os, corpus);
  return os.str();
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open corpus file for writing: " + path.string());
  write_corpus(os, corpus);
  if (!os) throw FormatError("failed writing corpus file: " + path.string());
}

Corpus read_corpus(std::istream& is) {
  Corpus c;
  std::array<std::vector<std::string>, 3> codes;
  std::map<std::string, std::vector<std::pair<std::size_t, Patient>>> patients;
  bool have_header = false;
  json counts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (lineno == 1 && kind != "header") throw FormatError("first record must be the header");
      if (kind == "header") {
        if (have_header) throw FormatError("duplicate header");
        have_header = true;
        c.header.format_version = j.at("format_version").get<int>();
        if (c.header.format_version != 1)
          throw FormatError("unsupported format_version " + std::to_string(c.header.format_version));
        c.header.seed = j.at("seed").get<std::uint64_t>();
        counts = j.at("counts");
      } else if (kind == "vocab") {
        const std::string space = j.at("space").get<std::string>();
        if (space == "category") {
          c.categories.push_back({j.at("field").get<std::string>(), j.at("values").get<std::vector<std::string>>()});
        } else if (space == "static") {
          c.static_feature_names = j.at("names").get<std::vector<std::string>>();
        } else {
          codes[static_cast<int>(space_from(space))] = j.at("codes").get<std::vector<std::string>>();
        }
      } else if (kind == "doctor") {
        DoctorRecord d;
        d.id = j.at("id").get<std::string>();
        d.country = j.at("country").get<std::string>();
        d.static_features = j.at("static").get<std::vector<double>>();
        d.planted_topics = j.at("planted_topics").get<std::vector<double>>();
        c.doctors.push_back(std::move(d));
      } else if (kind == "patient") {
        Patient p;
        for (const auto& v : j.at("visits")) p.visits.push_back(visit_from(v));
        patients[j.at("doctor").get<std::string>()].emplace_back(j.at("index").get<std::size_t>(), std::move(p));
      } else if (kind == "trial") {
        Trial t;
        t.id = j.at("id").get<std::string>();
        for (const auto& f : c.categories) {
          const auto value = j.at("categorical").at(f.name).get<std::string>();
          const auto idx = f.index(value);
          if (!idx) throw FormatError("trial " + t.id + ": unknown value '" + value + "' for field " + f.name);
          t.categorical.push_back(*idx);
        }
        if (j.at("categorical").size() != c.categories.size())
          throw FormatError("trial " + t.id + ": categorical fields do not match the declared schema");
        t.text_tokens = j.at("tokens").get<std::vector<std::string>>();
        for (const auto& e : j.at("enrollments"))
          t.enrollments.push_back({e.at("doctor").get<std::string>(), e.at("randomized").get<int>(),
                                   e.at("discontinued").get<int>(), e.at("window").get<double>()});
        t.planted_topics = j.at("planted_topics").get<std::vector<double>>();
        c.trials.push_back(std::move(t));
      } else if (kind == "sample") {
        Sample s;
        s.doctor_id = j.at("doctor").get<std::string>();
        s.trial_id = j.at("trial").get<std::string>();
        s.label.raw_rate = j.at("raw_rate").get<double>();
        s.label.normalized_rate = j.at("normalized_rate").get<double>();
        s.label.bin = j.at("bin").get<int>();
        c.samples.push_back(std::move(s));
      } else {
        throw FormatError("unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw FormatError("corpus line " + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw FormatError("corpus has no header record");

  c.vocab = CodeVocabulary(codes[0], codes[1], codes[2]);
  for (auto& d : c.doctors) {
    auto it = patients.find(d.id);
    if (it == patients.end()) continue;
    auto& list = it->second;
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (list[k].first != k) throw FormatError("doctor " + d.id + ": patient indices are not dense");
      d.patients.push_back(std::move(list[k].second));
    }
    patients.erase(it);
  }
  if (!patients.empty()) throw ValidationError("patient record for unknown doctor " + patients.begin()->first);

  c.reindex();
  c.validate();
  if (counts.at("doctors").get<std::size_t>() != c.doctors.size() ||
      counts.at("trials").get<std::size_t>() != c.trials.size() ||
      counts.at("samples").get<std::size_t>() != c.samples.size() ||
      counts.at("patients").get<std::size_t>() != c.patient_count())
    throw FormatError("record counts do not match the header (truncated file?)");
  return c;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open corpus file: " + path.string());
  return read_corpus(is);
}

}  // namespace d2v::data
