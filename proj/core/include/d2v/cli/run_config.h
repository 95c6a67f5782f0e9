#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "d2v/eval/experiment.h"
#include "d2v/syn/generator.h"

namespace d2v::cli {

// Bad command line or configuration. Maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every setting of a run. Each field has a default and a flat key (see
// RunConfig::keys()); lists are comma separated.
struct RunConfig {
  // Paths. Not part of the config hash.
  std::string corpus;
  std::string checkpoint;
  std::string results;
  std::string out;
  std::string log;

  std::uint64_t seed = 1;
  // Comma-separated model kinds; train and predict accept exactly one.
  std::string model = "doctor2vec";
  int n_seeds = 10;
  syn::GenConfig gen;
  mem::TrainConfig train;
  mem::Doctor2VecConfig doctor2vec;
  base::BaselineConfig baseline;
  std::string mode = "standard";
  std::string train_filter;
  std::string test_filter;

  // All recognized keys in canonical (sorted) order.
  static const std::vector<std::string>& keys();
  static bool is_path_key(const std::string& key);

  // Throws UsageError for an unknown key or a value of the wrong type.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  // Sorted "key=value" lines of every non-path key.
  std::string canonical() const;
  std::string hash() const;

  std::vector<std::string> model_kinds() const;
  std::vector<std::uint64_t> seeds() const;  // seed, seed + 1, ..., n_seeds values
  eval::ModelSettings model_settings(const std::string& kind) const;
  eval::ExperimentSpec experiment(const std::string& kind) const;
};

// Parsed "key=value" configuration text. Blank lines and lines starting with
// '#' are ignored; whitespace around keys and values is trimmed. Throws
// UsageError naming the 1-based line for a malformed line or unknown key.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::istream& is, const std::string& source);

struct ConfigSources {
  std::optional<std::string> config_file;
  // Applied in order after the file.
  std::vector<std::pair<std::string, std::string>> flags;
  // Value of D2V_SEED, used when neither the file nor a flag sets `seed`.
  std::optional<std::string> env_seed;
};

// Defaults, then the file, then flags. Throws UsageError.
RunConfig resolve_config(const ConfigSources& sources);

}  // namespace d2v::cli
