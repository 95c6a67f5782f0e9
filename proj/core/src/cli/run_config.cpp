#include "d2v/cli/run_config.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "d2v/enc/text.h"
#include "d2v/error.h"

namespace d2v::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw UsageError("invalid value '" + value + "' for " + key + ": expected " + expected);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || p != end) bad_value(key, v, "an integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(trim(item));
  return out;
}

template <typename T>
std::vector<T> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  for (const auto& s : split_list(v)) out.push_back(parse_integer<T>(key, s));
  return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(parse_double(key, s));
  return out;
}

template <typename T, std::size_t N>
std::array<T, N> to_array(const std::string& key, const std::vector<T>& v) {
  if (v.size() != N) throw UsageError(key + " needs exactly " + std::to_string(N) + " comma-separated values");
  std::array<T, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

std::string fmt_double(double v) { return nlohmann::json(v).dump(); }

std::string ints(const auto& range) {
  std::string out;
  for (const auto& x : range) {
    if (!out.empty()) out += ',';
    out += std::to_string(x);
  }
  return out;
}

std::string doubles(const auto& range) {
  std::string out;
  for (const auto& x : range) {
    if (!out.empty()) out += ',';
    out += fmt_double(x);
  }
  return out;
}

std::string strings(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& x : v) {
    if (!out.empty()) out += ',';
    out += x;
  }
  return out;
}

struct Binding {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
};

#define D2V_INT(field)                                                                                         \
  Binding {                                                                                                    \
    [](const RunConfig& c) { return std::to_string(c.field); },                                                \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_integer<decltype(c.field)>(k, v); } \
  }
#define D2V_DOUBLE(field)                                                                                     \
  Binding {                                                                                                   \
    [](const RunConfig& c) { return fmt_double(c.field); },                                                   \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_double(k, v); } \
  }
#define D2V_STRING(field)                                                                 \
  Binding {                                                                               \
    [](const RunConfig& c) { return c.field; },                                           \
        [](RunConfig& c, const std::string&, const std::string& v) { c.field = v; } \
  }
#define D2V_SIZE_LIST(field)                                                                      \
  Binding {                                                                                       \
    [](const RunConfig& c) { return ints(c.field); },                                             \
        [](RunConfig& c, const std::string& k, const std::string& v) {                            \
          auto list = parse_int_list<std::size_t>(k, v);                                          \
          if (list.empty() || std::count(list.begin(), list.end(), 0u))                           \
            throw UsageError(k + " needs one or more positive widths");                           \
          c.field = std::move(list);                                                              \
        }                                                                                         \
  }

#define D2V_FILTER(field)                                                    \
  Binding {                                                                  \
    [](const RunConfig& c) { return c.field; },                              \
        [](RunConfig& c, const std::string& k, const std::string& v) {       \
          if (!v.empty()) {                                                  \
            try {                                                            \
              eval::TrialFilter::parse(v);                                   \
            } catch (const ValidationError&) {                               \
              bad_value(k, v, "field=value");                                \
            }                                                                \
          }                                                                  \
          c.field = v;                                                       \
        }                                                                    \
  }

const std::map<std::string, Binding>& bindings() {
  static const std::map<std::string, Binding> table = {
      {"corpus", D2V_STRING(corpus)},
      {"checkpoint", D2V_STRING(checkpoint)},
      {"results", D2V_STRING(results)},
      {"out", D2V_STRING(out)},
      {"log", D2V_STRING(log)},
      {"seed", D2V_INT(seed)},
      {"model",
       {[](const RunConfig& c) { return c.model; },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          const auto kinds = split_list(v);
          if (kinds.empty()) throw UsageError(k + " needs at least one model kind");
          for (const auto& kind : kinds)
            if (std::find(eval::model_kinds().begin(), eval::model_kinds().end(), kind) == eval::model_kinds().end())
              throw UsageError("unknown model kind '" + kind + "'");
          c.model = strings(kinds);
        }}},
      {"experiment.n_seeds",
       {[](const RunConfig& c) { return std::to_string(c.n_seeds); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.n_seeds = parse_integer<int>(k, v);
          if (c.n_seeds < 1) throw UsageError(k + " must be positive");
        }}},
      {"experiment.mode",
       {[](const RunConfig& c) { return c.mode; },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.mode = eval::mode_name(eval::parse_mode(v));
          } catch (const ValidationError&) {
            bad_value(k, v, "standard, transfer_country or transfer_disease");
          }
        }}},
      {"experiment.train_filter", D2V_FILTER(train_filter)},
      {"experiment.test_filter", D2V_FILTER(test_filter)},

      {"gen.n_doctors", D2V_INT(gen.n_doctors)},
      {"gen.n_trials", D2V_INT(gen.n_trials)},
      {"gen.patients_min", D2V_INT(gen.patients_per_doctor.lo)},
      {"gen.patients_max", D2V_INT(gen.patients_per_doctor.hi)},
      {"gen.visits_min", D2V_INT(gen.visits_per_patient.lo)},
      {"gen.visits_max", D2V_INT(gen.visits_per_patient.hi)},
      {"gen.investigators_min", D2V_INT(gen.investigators_per_trial.lo)},
      {"gen.investigators_max", D2V_INT(gen.investigators_per_trial.hi)},
      {"gen.vocab_sizes",
       {[](const RunConfig& c) { return ints(c.gen.vocab_sizes); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.gen.vocab_sizes = to_array<int, 3>(k, parse_int_list<int>(k, v));
        }}},
      {"gen.mean_codes",
       {[](const RunConfig& c) { return doubles(c.gen.mean_codes); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.gen.mean_codes = to_array<double, 3>(k, parse_double_list(k, v));
        }}},
      {"gen.max_codes",
       {[](const RunConfig& c) { return ints(c.gen.max_codes); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.gen.max_codes = to_array<int, 3>(k, parse_int_list<int>(k, v));
        }}},
      {"gen.n_topics", D2V_INT(gen.n_topics)},
      {"gen.n_rare_topics", D2V_INT(gen.n_rare_topics)},
      {"gen.noise_std", D2V_DOUBLE(gen.noise_std)},
      {"gen.target_bins",
       {[](const RunConfig& c) { return doubles(c.gen.target_bin_distribution); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.gen.target_bin_distribution = to_array<double, 5>(k, parse_double_list(k, v));
        }}},
      {"gen.calibration_tolerance", D2V_DOUBLE(gen.calibration_tolerance)},
      {"gen.max_retries", D2V_INT(gen.max_retries)},
      {"gen.background_weight", D2V_DOUBLE(gen.background_weight)},
      {"gen.background_fraction", D2V_DOUBLE(gen.background_fraction)},
      {"gen.doctor_concentration", D2V_DOUBLE(gen.doctor_concentration)},
      {"gen.patient_concentration", D2V_DOUBLE(gen.patient_concentration)},
      {"gen.countries",
       {[](const RunConfig& c) { return strings(c.gen.countries); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.gen.countries = split_list(v);
          if (c.gen.countries.empty()) throw UsageError(k + " needs at least one country");
        }}},
      {"gen.country_weights",
       {[](const RunConfig& c) { return doubles(c.gen.country_weights); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.gen.country_weights = parse_double_list(k, v); }}},

      {"train.batch_size", D2V_INT(train.batch_size)},
      {"train.max_epochs", D2V_INT(train.max_epochs)},
      {"train.learning_rate", D2V_DOUBLE(train.learning_rate)},
      {"train.decay", D2V_DOUBLE(train.decay)},
      {"train.class_weight", D2V_DOUBLE(train.class_weight)},
      {"train.regression_weight", D2V_DOUBLE(train.regression_weight)},
      {"train.patience", D2V_INT(train.patience)},

      {"d2v.visit_dim", D2V_INT(doctor2vec.visit_dim)},
      {"d2v.hidden", D2V_INT(doctor2vec.hidden)},
      {"d2v.query_dim", D2V_INT(doctor2vec.query_dim)},
      {"d2v.categorical_layers", D2V_SIZE_LIST(doctor2vec.categorical_layers)},
      {"d2v.memory_layers", D2V_SIZE_LIST(doctor2vec.memory_layers)},
      {"d2v.text_dim", D2V_INT(doctor2vec.text_dim)},
      {"d2v.text_mode",
       {[](const RunConfig& c) { return c.doctor2vec.text_mode; },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v != "hashed" && v != "precomputed") bad_value(k, v, "hashed or precomputed");
          c.doctor2vec.text_mode = v;
        }}},
      {"d2v.embedding_file", D2V_STRING(doctor2vec.embedding_file)},
      {"d2v.k_max", D2V_INT(doctor2vec.k_max)},
      {"d2v.generalization",
       {[](const RunConfig& c) { return std::string(c.doctor2vec.identity_generalization ? "identity" : "learned"); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v != "identity" && v != "learned") bad_value(k, v, "learned or identity");
          c.doctor2vec.identity_generalization = v == "identity";
        }}},
      {"d2v.generalization_passes", D2V_INT(doctor2vec.generalization_passes)},
      {"d2v.lstm_l2", D2V_DOUBLE(doctor2vec.lstm_l2)},

      {"baseline.mlp_layers", D2V_SIZE_LIST(baseline.mlp_layers)},
      {"baseline.l2", D2V_DOUBLE(baseline.l2)},
      {"baseline.visit_dim", D2V_INT(baseline.visit_dim)},
      {"baseline.lstm_hidden", D2V_INT(baseline.lstm_hidden)},
      {"baseline.trial_dim", D2V_INT(baseline.trial_dim)},
      {"baseline.top_k", D2V_INT(baseline.top_k)},
      {"baseline.doctor_layers", D2V_SIZE_LIST(baseline.doctor_layers)},
      {"baseline.categorical_layers", D2V_SIZE_LIST(baseline.categorical_layers)},
      {"baseline.area_field", D2V_STRING(baseline.area_field)},
  };
  return table;
}

#undef D2V_INT
#undef D2V_DOUBLE
#undef D2V_STRING
#undef D2V_SIZE_LIST
#undef D2V_FILTER

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, b] : bindings()) out.push_back(key);
    return out;
  }();
  return k;
}

bool RunConfig::is_path_key(const std::string& key) {
  return key == "corpus" || key == "checkpoint" || key == "results" || key == "out" || key == "log";
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = bindings().find(key);
  if (it == bindings().end()) throw UsageError("unknown config key '" + key + "'");
  it->second.set(*this, key, value);
}

std::string RunConfig::get(const std::string& key) const {
  const auto it = bindings().find(key);
  if (it == bindings().end()) throw UsageError("unknown config key '" + key + "'");
  return it->second.get(*this);
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [key, b] : bindings())
    if (!is_path_key(key)) out += key + "=" + b.get(*this) + "\n";
  return out;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(enc::fnv1a64(canonical())));
  return buf;
}

std::vector<std::string> RunConfig::model_kinds() const { return split_list(model); }

std::vector<std::uint64_t> RunConfig::seeds() const {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n_seeds; ++i) out.push_back(seed + static_cast<std::uint64_t>(i));
  return out;
}

eval::ModelSettings RunConfig::model_settings(const std::string& kind) const {
  eval::ModelSettings s;
  s.kind = kind;
  s.doctor2vec = doctor2vec;
  s.baseline = baseline;
  return s;
}

eval::ExperimentSpec RunConfig::experiment(const std::string& kind) const {
  eval::ExperimentSpec s;
  s.mode = eval::parse_mode(mode);
  if (!train_filter.empty()) s.train_filter = eval::TrialFilter::parse(train_filter);
  if (!test_filter.empty()) s.test_filter = eval::TrialFilter::parse(test_filter);
  s.model = model_settings(kind);
  s.train = train;
  s.train.seed = seed;
  s.seeds = seeds();
  s.config_hash = hash();
  return s;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::istream& is, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  int line_no = 0;
  for (std::string line; std::getline(is, line);) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw UsageError(where + ": expected key=value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw UsageError(where + ": missing key");
    if (bindings().find(key) == bindings().end()) throw UsageError(where + ": unknown config key '" + key + "'");
    out.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return out;
}

RunConfig resolve_config(const ConfigSources& sources) {
  RunConfig cfg;
  bool seed_set = false;
  if (sources.config_file) {
    std::ifstream is(*sources.config_file);
    if (!is) throw UsageError("cannot read config file " + *sources.config_file);
    int line_no = 0;
    // Re-read to attach line numbers to value errors as well.
    const auto entries = parse_config_text(is, *sources.config_file);
    is.clear();
    is.seekg(0);
    std::vector<int> lines;
    for (std::string line; std::getline(is, line);) {
      ++line_no;
      const std::string t = trim(line);
      if (!t.empty() && t[0] != '#') lines.push_back(line_no);
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      try {
        cfg.set(entries[i].first, entries[i].second);
      } catch (const UsageError& e) {
        throw UsageError(*sources.config_file + ":" + std::to_string(lines[i]) + ": " + e.what());
      }
      seed_set = seed_set || entries[i].first == "seed";
    }
  }
  for (const auto& [k, v] : sources.flags) {
    cfg.set(k, v);
    seed_set = seed_set || k == "seed";
  }
  if (!seed_set && sources.env_seed) {
    try {
      cfg.set("seed", *sources.env_seed);
    } catch (const UsageError& e) {
      throw UsageError(std::string("D2V_SEED: ") + e.what());
    }
  }
  return cfg;
}

}  // namespace d2v::cli
