#include "app.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "d2v/cli/checkpoint.h"
#include "d2v/cli/run_config.h"
#include "d2v/data/corpus_io.h"
#include "d2v/error.h"
#include "d2v/eval/experiment.h"
#include "d2v/syn/generator.h"

#ifndef D2V_VERSION
#define D2V_VERSION "unknown"
#endif

namespace d2v::cli {

namespace {

using nlohmann::json;

std::string compiler_id() {
#if defined(__clang__)
  return std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  return std::string("gcc ") + __VERSION__;
#else
  return "unknown";
#endif
}

// Values of the command-line options, in the order they are applied.
struct Flags {
  std::optional<std::string> config;
  std::vector<std::string> sets;
  std::optional<std::string> corpus, out, ckpt, results, log, model, seed, mode, train_filter, test_filter;
  std::optional<std::string> epochs, seeds;
  std::string doctor, trial;
};

ConfigSources sources_of(const Flags& f) {
  ConfigSources s;
  s.config_file = f.config;
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + kv + "'");
    s.flags.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  const std::pair<const std::optional<std::string>*, const char*> named[] = {
      {&f.corpus, "corpus"},
      {&f.out, "out"},
      {&f.ckpt, "checkpoint"},
      {&f.results, "results"},
      {&f.log, "log"},
      {&f.model, "model"},
      {&f.seed, "seed"},
      {&f.mode, "experiment.mode"},
      {&f.train_filter, "experiment.train_filter"},
      {&f.test_filter, "experiment.test_filter"},
      {&f.epochs, "train.max_epochs"},
      {&f.seeds, "experiment.n_seeds"},
  };
  for (const auto& [value, key] : named)
    if (*value) s.flags.emplace_back(key, **value);
  if (const char* env = std::getenv("D2V_SEED")) s.env_seed = env;
  return s;
}

const std::string& require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required option ") + flag);
  return value;
}

std::vector<std::string> checked_kinds(const RunConfig& cfg) {
  const auto kinds = cfg.model_kinds();
  if (kinds.empty()) throw UsageError("no model kind given");
  for (const auto& k : kinds)
    if (std::find(eval::model_kinds().begin(), eval::model_kinds().end(), k) == eval::model_kinds().end())
      throw UsageError("unknown model kind '" + k + "'");
  return kinds;
}

json thresholds_json(const mem::Thresholds& t) {
  return {{"value", t.value}, {"active", t.active}, {"argmax_only", t.argmax_only}, {"warning", t.warning}};
}

mem::Thresholds thresholds_from_json(const json& j) {
  mem::Thresholds t;
  t.value = j.at("value").get<std::array<double, data::kNumBins>>();
  t.active = j.at("active").get<std::array<bool, data::kNumBins>>();
  t.argmax_only = j.at("argmax_only").get<bool>();
  t.warning = j.value("warning", "");
  return t;
}

json report_json(const eval::MetricReport& r) {
  json per_class = json::array();
  for (int c = 0; c < data::kNumBins; ++c)
    per_class.push_back({{"class", c},
                         {"pr_auc", r.class_pr_auc[c] ? json(*r.class_pr_auc[c]) : json(nullptr)},
                         {"precision", r.class_precision[c]},
                         {"recall", r.class_recall[c]},
                         {"support", r.class_support[c]}});
  return {{"model", r.model},     {"mode", r.mode},           {"seed", r.seed},
          {"pr_auc", r.pr_auc},   {"precision", r.precision}, {"recall", r.recall},
          {"r2", r.r2},           {"mse", r.mse},             {"n_test", r.n_samples},
          {"best_epoch", r.best_epoch}, {"config_hash", r.config_hash}, {"per_class", per_class},
          {"thresholds", thresholds_json(r.thresholds)}};
}

json aggregate_json(const eval::Aggregate& a) {
  return {{"pr_auc", a.pr_auc}, {"precision", a.precision}, {"recall", a.recall},
          {"r2", a.r2},         {"mse", a.mse},             {"n_test", a.n_samples}};
}

json provenance(const std::string& command, const RunConfig& cfg) {
  return {{"command", command},   {"config_hash", cfg.hash()}, {"seed", cfg.seed},
          {"version", D2V_VERSION}, {"compiler", compiler_id()}};
}

// Epoch log: the resolved config as comment lines, then one CSV row per epoch.
class EpochLogFile {
 public:
  EpochLogFile(const RunConfig& cfg) {
    if (cfg.log.empty()) return;
    os_.open(cfg.log, std::ios::app | std::ios::binary);
    if (!os_) throw std::runtime_error("cannot open log file " + cfg.log);
    os_ << "# config_hash=" << cfg.hash() << '\n';
    std::istringstream lines(cfg.canonical());
    for (std::string line; std::getline(lines, line);) os_ << "# " << line << '\n';
    os_ << "model,seed,epoch,train_loss,val_loss,val_pr_auc\n";
  }

  void row(const std::string& model, std::uint64_t seed, const mem::EpochLog& e) {
    if (!os_.is_open()) return;
    os_ << model << ',' << seed << ',' << e.epoch << ',' << json(e.train_loss).dump() << ','
        << json(e.val_loss).dump() << ',' << json(e.val_pr_auc).dump() << '\n';
    os_.flush();
  }

 private:
  std::ofstream os_;
};

data::Corpus load_corpus_arg(const RunConfig& cfg) { return data::load_corpus(require_path(cfg.corpus, "--corpus")); }

int cmd_generate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto& path = require_path(cfg.out, "--out");
  syn::GenConfig gen = cfg.gen;
  gen.seed = cfg.seed;
  try {
    gen.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  const auto g = syn::generate(gen);
  data::save_corpus(path, g.corpus);
  err << "wrote " << path << " after " << g.attempts << " attempt(s)\n";
  json summary = {{"corpus", path},
                  {"doctors", g.corpus.doctors.size()},
                  {"trials", g.corpus.trials.size()},
                  {"samples", g.corpus.samples.size()},
                  {"bin_distribution", g.achieved_bin_distribution}};
  out << summary.dump() << '\n';
  if (!cfg.results.empty()) {
    auto p = provenance("generate", cfg);
    p["corpus"] = summary;
    eval::append_provenance(cfg.results, p);
  }
  return 0;
}

// Runs one experiment per model kind and appends the rows and a provenance
// record per kind to the results file.
int run_experiments(const std::string& command, const RunConfig& cfg, const std::vector<std::uint64_t>& seeds,
                    const std::string& checkpoint, std::ostream& out, std::ostream& err) {
  const auto kinds = checked_kinds(cfg);
  eval::ExperimentSpec base_spec;
  try {
    base_spec = cfg.experiment(kinds.front());
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  if (base_spec.mode != eval::Mode::kStandard && (!base_spec.train_filter || !base_spec.test_filter))
    throw UsageError("transfer runs need --train-filter and --test-filter");
  const auto corpus = load_corpus_arg(cfg);
  EpochLogFile log(cfg);
  out << eval::kResultsHeader << '\n';
  for (const auto& kind : kinds) {
    auto spec = cfg.experiment(kind);
    spec.seeds = seeds;
    std::uint64_t current_seed = 0;
    eval::RunHooks hooks;
    hooks.on_seed = [&](std::uint64_t s) { current_seed = s; };
    hooks.on_epoch = [&](const mem::EpochLog& e) { log.row(kind, current_seed, e); };
    hooks.on_trained = [&](const mem::Model& model, const eval::MetricReport& r) {
      err << kind << " seed " << r.seed << ": pr_auc " << r.pr_auc << " r2 " << r.r2 << " best epoch "
          << r.best_epoch << '\n';
      if (checkpoint.empty()) return;
      CheckpointHeader h;
      h.config_hash = r.config_hash;
      h.model_kind = model.kind();
      h.model_config = model.config();
      h.metrics = report_json(r);
      save_checkpoint(checkpoint, h, model.params());
      err << "wrote checkpoint " << checkpoint << '\n';
    };
    const auto result = eval::run_experiment(corpus, spec, hooks);
    eval::write_result_rows(out, result);
    if (!cfg.results.empty()) {
      eval::append_results(cfg.results, result);
      auto p = provenance(command, cfg);
      p["model"] = kind;
      p["mode"] = eval::mode_name(spec.mode);
      p["seeds"] = seeds;
      p["mean"] = aggregate_json(result.mean);
      p["std"] = aggregate_json(result.std);
      eval::append_provenance(cfg.results, p);
    }
  }
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.model_kinds().size() != 1) throw UsageError("train takes exactly one --model");
  const std::string ckpt = !cfg.checkpoint.empty() ? cfg.checkpoint : cfg.out;
  require_path(ckpt, "--out");
  return run_experiments("train", cfg, {cfg.seed}, ckpt, out, err);
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return run_experiments("evaluate", cfg, cfg.seeds(), "", out, err);
}

// Disease transfer defaults to training on common and testing on rare
// diseases.
void apply_transfer_defaults(RunConfig& cfg) {
  const auto mode = eval::parse_mode(cfg.mode);
  if (mode == eval::Mode::kStandard) throw UsageError("transfer needs --mode country or --mode disease");
  if (mode == eval::Mode::kTransferDisease && cfg.train_filter.empty() && cfg.test_filter.empty()) {
    cfg.train_filter = "prevalence=common";
    cfg.test_filter = "prevalence=rare";
  }
}

int cmd_transfer(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return run_experiments("transfer", cfg, cfg.seeds(), "", out, err);
}

int cmd_predict(const RunConfig& cfg, const Flags& flags, std::ostream& out) {
  const auto& ckpt_path = require_path(cfg.checkpoint, "--ckpt");
  if (flags.doctor.empty()) throw UsageError("missing required option --doctor");
  if (flags.trial.empty()) throw UsageError("missing required option --trial");
  const auto corpus = load_corpus_arg(cfg);
  const auto ck = read_checkpoint(ckpt_path);
  if (!corpus.has_doctor(flags.doctor)) throw ValidationError("unknown doctor '" + flags.doctor + "'");
  if (!corpus.has_trial(flags.trial)) throw ValidationError("unknown trial '" + flags.trial + "'");
  auto model = eval::make_model(ck.header.model_kind, ck.header.model_config, corpus);
  restore_parameters(ck, model->params());

  const mem::Pair pair{corpus.doctor_index(flags.doctor), corpus.trial_index(flags.trial)};
  num::Tape tape;
  const auto f = model->forward(tape, std::span<const mem::Pair>(&pair, 1));
  eval::ClassProbs probs{};
  for (int c = 0; c < data::kNumBins; ++c) probs[c] = f.probs.value().at(0, c);
  const auto thresholds = ck.header.metrics.contains("thresholds")
                              ? thresholds_from_json(ck.header.metrics.at("thresholds"))
                              : mem::Thresholds{{}, {}, true, ""};
  json attention = json::array();
  std::vector<std::pair<double, std::size_t>> ranked;
  if (f.attention) {
    const auto& a = f.attention->value().values();
    for (std::size_t r = f.attention_offsets[0]; r < f.attention_offsets[1]; ++r) {
      attention.push_back({{"patient", f.attention_patients[r]}, {"weight", a[r]}});
      ranked.emplace_back(a[r], f.attention_patients[r]);
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  json top = json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i) top.push_back(ranked[i].second);

  json line = {{"doctor", flags.doctor},
               {"trial", flags.trial},
               {"model", ck.header.model_kind},
               {"probs", probs},
               {"class", mem::decide(thresholds, probs)},
               {"rate", f.rate.value().at(0, 0)},
               {"attention", attention},
               {"top_patients", top}};
  out << line.dump() << '\n';
  return 0;
}

json corpus_summary(const data::Corpus& c) {
  std::size_t visits = 0;
  for (const auto& d : c.doctors)
    for (const auto& p : d.patients) visits += p.visits.size();
  json categories = json::object();
  for (std::size_t f = 0; f < c.categories.size(); ++f) {
    std::map<std::string, int> counts;
    for (const auto& v : c.categories[f].values) counts[v] = 0;
    for (const auto& t : c.trials) ++counts[c.categories[f].values[t.categorical[f]]];
    categories[c.categories[f].name] = counts;
  }
  return {{"doctors", c.doctors.size()},
          {"patients", c.patient_count()},
          {"visits", visits},
          {"trials", c.trials.size()},
          {"samples", c.samples.size()},
          {"vocab",
           {{"diagnosis", c.vocab.size(data::CodeSpace::kDiagnosis)},
            {"procedure", c.vocab.size(data::CodeSpace::kProcedure)},
            {"medication", c.vocab.size(data::CodeSpace::kMedication)}}},
          {"static_features", c.static_feature_names},
          {"trial_categories", categories},
          {"bin_distribution", syn::bin_distribution(c)}};
}

int cmd_inspect(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.checkpoint.empty()) {
    const auto ck = read_checkpoint(cfg.checkpoint);
    json blocks = json::array();
    std::size_t total = 0;
    for (const auto& [name, t] : ck.blocks) {
      blocks.push_back({{"name", name}, {"shape", t.shape()}});
      total += t.size();
    }
    json summary = {{"checkpoint", cfg.checkpoint},
                    {"format_version", ck.header.format_version},
                    {"model", ck.header.model_kind},
                    {"config_hash", ck.header.config_hash},
                    {"model_config", ck.header.model_config},
                    {"metrics", ck.header.metrics},
                    {"parameters", total},
                    {"blocks", blocks}};
    out << summary.dump(2) << '\n';
    return 0;
  }
  if (cfg.corpus.empty()) throw UsageError("inspect needs --corpus or --ckpt");
  out << corpus_summary(load_corpus_arg(cfg)).dump(2) << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Doctor2Vec enrollment prediction toolkit", "d2v"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "key=value configuration file");
  app.add_option("--set", f.sets, "Override one config key (key=value); repeatable");
  app.add_option("--corpus", f.corpus, "Corpus file");
  app.add_option("--out", f.out, "Output path (corpus for generate, checkpoint for train)");
  app.add_option("--ckpt", f.ckpt, "Checkpoint file");
  app.add_option("--results", f.results, "Results CSV to append to");
  app.add_option("--log", f.log, "Epoch log CSV to append to");
  app.add_option("--model", f.model, "Model kind(s), comma separated");
  app.add_option("--seed", f.seed, "Base seed");
  app.add_option("--mode", f.mode, "standard, country or disease");
  app.add_option("--train-filter", f.train_filter, "Trial filter field=value for the training region");
  app.add_option("--test-filter", f.test_filter, "Trial filter field=value for the test region");
  app.add_option("--epochs", f.epochs, "Maximum training epochs");
  app.add_option("--seeds", f.seeds, "Number of seeds for evaluate and transfer");
  app.add_option("--doctor", f.doctor, "Doctor id for predict");
  app.add_option("--trial", f.trial, "Trial id for predict");

  const std::map<std::string, std::string> commands = {
      {"generate", "Generate a synthetic corpus"},
      {"train", "Train one model on the standard split and save a checkpoint"},
      {"evaluate", "Train and score models over several seeds"},
      {"transfer", "Country or disease transfer experiment"},
      {"predict", "Score one doctor/trial pair from a checkpoint"},
      {"inspect", "Summarize a corpus or checkpoint"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    RunConfig cfg = resolve_config(sources_of(f));
    if (command == "transfer") apply_transfer_defaults(cfg);
    err << "config hash " << cfg.hash() << '\n';
    if (command == "generate") return cmd_generate(cfg, out, err);
    if (command == "train") return cmd_train(cfg, out, err);
    if (command == "evaluate") return cmd_evaluate(cfg, out, err);
    if (command == "transfer") return cmd_transfer(cfg, out, err);
    if (command == "predict") return cmd_predict(cfg, f, out);
    return cmd_inspect(cfg, out);
  } catch (const UsageError& e) {
    err << "d2v " << command << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "d2v " << command << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace d2v::cli
