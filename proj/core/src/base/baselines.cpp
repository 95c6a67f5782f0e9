#include "d2v/base/baselines.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "d2v/base/features.h"
#include "d2v/data/labels.h"
#include "d2v/enc/trial.h"
#include "d2v/error.h"

namespace d2v::base {

using mem::ForwardOutput;
using mem::Pair;
using num::Tape;
using num::Tensor;
using num::Var;

void to_json(nlohmann::json& j, const BaselineConfig& c) {
  j = {{"mlp_layers", c.mlp_layers},
       {"l2", c.l2},
       {"visit_dim", c.visit_dim},
       {"lstm_hidden", c.lstm_hidden},
       {"trial_dim", c.trial_dim},
       {"top_k", c.top_k},
       {"doctor_layers", c.doctor_layers},
       {"categorical_layers", c.categorical_layers},
       {"area_field", c.area_field},
       {"zero_init", c.zero_init},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, BaselineConfig& c) {
  j.at("mlp_layers").get_to(c.mlp_layers);
  j.at("l2").get_to(c.l2);
  j.at("visit_dim").get_to(c.visit_dim);
  j.at("lstm_hidden").get_to(c.lstm_hidden);
  j.at("trial_dim").get_to(c.trial_dim);
  j.at("top_k").get_to(c.top_k);
  j.at("doctor_layers").get_to(c.doctor_layers);
  j.at("categorical_layers").get_to(c.categorical_layers);
  j.at("area_field").get_to(c.area_field);
  j.at("zero_init").get_to(c.zero_init);
  j.at("seed").get_to(c.seed);
}

namespace {

Tensor all_onehots(const data::Corpus& corpus) {
  std::vector<std::size_t> all(corpus.trials.size());
  std::iota(all.begin(), all.end(), 0);
  return enc::categorical_onehots(corpus, all);
}

Tensor gather(const Tensor& table, std::span<const std::size_t> rows) {
  Tensor out = Tensor::matrix(rows.size(), table.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(table.row_span(rows[i]).begin(), table.cols(), out.row_span(i).begin());
  return out;
}

void log1p_inplace(Tensor& t) {
  for (auto& v : t.values()) v = std::log1p(v);
}

void zero_all(num::ParameterStore& store) {
  for (std::size_t i = 0; i < store.size(); ++i) std::fill(store[i].value.values().begin(), store[i].value.values().end(), 0.0);
}

void check_pairs(const data::Corpus& corpus, std::span<const Pair> pairs, const std::string& who) {
  D2V_REQUIRE(!pairs.empty(), who + ": empty batch");
  for (const auto& p : pairs)
    D2V_REQUIRE(p.doctor < corpus.doctors.size() && p.trial < corpus.trials.size(), who + ": pair out of range");
}

// Unique doctors and trials of a batch in order of first appearance, with
// each pair's slot in those lists.
struct BatchIndex {
  std::vector<std::size_t> doctors, trials, doctor_of, trial_of;
};

BatchIndex index_batch(std::span<const Pair> pairs) {
  BatchIndex b;
  std::unordered_map<std::size_t, std::size_t> ds, ts;
  for (const auto& p : pairs) {
    auto [di, dn] = ds.try_emplace(p.doctor, b.doctors.size());
    if (dn) b.doctors.push_back(p.doctor);
    auto [ti, tn] = ts.try_emplace(p.trial, b.trials.size());
    if (tn) b.trials.push_back(p.trial);
    b.doctor_of.push_back(di->second);
    b.trial_of.push_back(ti->second);
  }
  return b;
}

ForwardOutput heads(Tape& tape, Var x, const enc::Linear& cls, const enc::Linear& reg) {
  ForwardOutput out;
  out.probs = num::softmax_rows(cls(tape, x));
  out.rate = num::sigmoid(reg(tape, x));
  return out;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

// ---- median ----

MedianBaseline::MedianBaseline(const data::Corpus& corpus, const BaselineConfig& config)
    : corpus_(corpus), config_(config) {
  area_field_ = corpus.category_index(config.area_field);
  n_areas_ = corpus.categories[area_field_].values.size();
  rates_ = &params_.add("median.rates",
                        Tensor({n_areas_ + 1, 1}, std::numeric_limits<double>::quiet_NaN()));
}

void MedianBaseline::fit(std::span<const std::size_t> train_samples) {
  if (train_samples.empty()) throw ValidationError("median baseline: empty training set");
  std::vector<std::vector<double>> by_area(n_areas_);
  std::vector<double> all;
  for (auto i : train_samples) {
    const auto& s = corpus_.samples.at(i);
    const double r = s.label.normalized_rate;
    by_area[corpus_.trials[s.trial].categorical.at(area_field_)].push_back(r);
    all.push_back(r);
  }
  const double global = median_of(all);
  for (std::size_t a = 0; a < n_areas_; ++a) rates_->value[a] = by_area[a].empty() ? global : median_of(by_area[a]);
  rates_->value[n_areas_] = global;
}

double MedianBaseline::area_median(std::size_t area) const {
  D2V_REQUIRE(area < n_areas_, "median baseline: area out of range");
  return rates_->value[area];
}

double MedianBaseline::global_median() const { return rates_->value[n_areas_]; }

ForwardOutput MedianBaseline::forward(Tape& tape, std::span<const Pair> pairs) const {
  check_pairs(corpus_, pairs, "median baseline");
  D2V_REQUIRE(rates_->value.all_finite(), "median baseline: fit() has not been called");
  Tensor probs = Tensor::matrix(pairs.size(), data::kNumBins);
  Tensor rate = Tensor::matrix(pairs.size(), 1);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double r = rates_->value[corpus_.trials[pairs[i].trial].categorical.at(area_field_)];
    rate[i] = r;
    probs.at(i, static_cast<std::size_t>(data::bin_rate(r))) = 1.0;
  }
  ForwardOutput out;
  out.probs = tape.constant(std::move(probs));
  out.rate = tape.constant(std::move(rate));
  return out;
}

// ---- logistic regression / MLP ----

FeatureBaseline::FeatureBaseline(const data::Corpus& corpus, const BaselineConfig& config, Kind kind)
    : corpus_(corpus), config_(config), kind_(kind) {
  D2V_REQUIRE(!corpus.doctors.empty() && !corpus.trials.empty(), "feature baseline: empty corpus");
  counts_ = doctor_count_matrix(corpus);
  log1p_inplace(counts_);
  onehots_ = all_onehots(corpus);
  tfidf_ = trial_tfidf_matrix(corpus);

  std::mt19937_64 rng(config.seed);
  std::size_t in = feature_dim();
  if (kind == Kind::kMlp) {
    D2V_REQUIRE(!config.mlp_layers.empty(), "mlp baseline: no hidden layers");
    body_ = enc::Mlp(params_, "mlp", in, config.mlp_layers, rng, /*relu_last=*/true);
    has_body_ = true;
    in = body_.out_dim();
  }
  head_ = enc::Linear(params_, "head.cls", in, data::kNumBins, rng);
  regression_ = enc::Linear(params_, "head.reg", in, 1, rng);
  if (config.zero_init) zero_all(params_);
}

Tensor FeatureBaseline::features(std::span<const Pair> pairs) const {
  Tensor x = Tensor::matrix(pairs.size(), feature_dim());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto row = x.row_span(i).begin();
    row = std::copy_n(counts_.row_span(pairs[i].doctor).begin(), counts_.cols(), row);
    row = std::copy_n(onehots_.row_span(pairs[i].trial).begin(), onehots_.cols(), row);
    std::copy_n(tfidf_.row_span(pairs[i].trial).begin(), tfidf_.cols(), row);
  }
  return x;
}

ForwardOutput FeatureBaseline::forward(Tape& tape, std::span<const Pair> pairs) const {
  check_pairs(corpus_, pairs, kind());
  Var x = tape.constant(features(pairs));
  if (has_body_) x = body_(tape, x);
  return heads(tape, x, head_, regression_);
}

std::optional<Var> FeatureBaseline::regularizer(Tape& tape) const {
  if (kind_ != Kind::kLogReg || config_.l2 <= 0.0) return std::nullopt;
  Var penalty = num::add(num::square_sum(tape.param(head_.weight())), num::square_sum(tape.param(regression_.weight())));
  return num::scale(penalty, config_.l2);
}

// ---- LSTM ----

LstmBaseline::LstmBaseline(const data::Corpus& corpus, const BaselineConfig& config)
    : corpus_(corpus), config_(config) {
  D2V_REQUIRE(!corpus.doctors.empty() && !corpus.trials.empty(), "lstm baseline: empty corpus");
  for (std::size_t d = 0; d < corpus.doctors.size(); ++d) {
    sequences_.push_back(doctor_visit_sequence(corpus, d));
    if (sequences_.back().empty()) throw ValidationError("lstm baseline: doctor " + corpus.doctors[d].id + " has no visits");
  }
  onehots_ = all_onehots(corpus);
  tfidf_ = trial_tfidf_matrix(corpus);

  std::mt19937_64 rng(config.seed);
  w_emb_ = &params_.add_xavier("lstm.w_emb", corpus.vocab.total(), config.visit_dim, rng);
  rnn_ = enc::Lstm(params_, "lstm.rnn", config.visit_dim, config.lstm_hidden, rng);
  cat_ = enc::Linear(params_, "lstm.cat", onehots_.cols(), config.trial_dim, rng);
  text_ = enc::Linear(params_, "lstm.text", tfidf_.cols(), config.trial_dim, rng);
  const std::size_t in = config.lstm_hidden + 2 * config.trial_dim;
  head_ = enc::Linear(params_, "head.cls", in, data::kNumBins, rng);
  regression_ = enc::Linear(params_, "head.reg", in, 1, rng);
  if (config.zero_init) zero_all(params_);
}

Var LstmBaseline::doctor_states(Tape& tape, std::span<const std::size_t> doctors) const {
  std::vector<std::vector<std::uint32_t>> visits;
  std::vector<std::size_t> offsets{0};
  for (auto d : doctors) {
    D2V_REQUIRE(d < sequences_.size(), "lstm baseline: doctor out of range");
    visits.insert(visits.end(), sequences_[d].begin(), sequences_[d].end());
    offsets.push_back(visits.size());
  }
  Var h = num::embedding_bag(tape.param(*w_emb_), visits);
  Var states = rnn_.run(tape, h, offsets);
  return num::gather_rows(states, enc::last_rows(offsets));
}

ForwardOutput LstmBaseline::forward(Tape& tape, std::span<const Pair> pairs) const {
  check_pairs(corpus_, pairs, "lstm baseline");
  const BatchIndex b = index_batch(pairs);
  Var doc = num::gather_rows(doctor_states(tape, b.doctors), b.doctor_of);
  Var cat = cat_(tape, tape.constant(gather(onehots_, b.trials)));
  Var text = text_(tape, tape.constant(gather(tfidf_, b.trials)));
  const std::vector<Var> parts{doc, num::gather_rows(cat, b.trial_of), num::gather_rows(text, b.trial_of)};
  return heads(tape, num::concat_cols(parts), head_, regression_);
}

// ---- DeepMatch ----

DeepMatchBaseline::DeepMatchBaseline(const data::Corpus& corpus, const BaselineConfig& config)
    : corpus_(corpus), config_(config) {
  D2V_REQUIRE(!corpus.doctors.empty() && !corpus.trials.empty(), "deepmatch baseline: empty corpus");
  D2V_REQUIRE(config.top_k > 0, "deepmatch baseline: top_k must be positive");
  codes_ = top_codes(corpus, config.top_k);
  D2V_REQUIRE(!codes_.empty(), "deepmatch baseline: corpus has no codes");
  const Tensor counts = doctor_count_matrix(corpus);
  doctor_features_ = Tensor::matrix(corpus.doctors.size(), codes_.size());
  for (std::size_t d = 0; d < corpus.doctors.size(); ++d)
    for (std::size_t j = 0; j < codes_.size(); ++j) doctor_features_.at(d, j) = std::log1p(counts.at(d, codes_[j]));
  onehots_ = all_onehots(corpus);
  tfidf_ = trial_tfidf_matrix(corpus);

  std::mt19937_64 rng(config.seed);
  doctor_mlp_ = enc::Mlp(params_, "deepmatch.doctor", codes_.size(), config.doctor_layers, rng, true);
  cat_mlp_ = enc::Mlp(params_, "deepmatch.cat", onehots_.cols(), config.categorical_layers, rng, true);
  text_ = enc::Linear(params_, "deepmatch.text", tfidf_.cols(), config.trial_dim, rng);
  const std::size_t in = doctor_mlp_.out_dim() + cat_mlp_.out_dim() + config.trial_dim;
  head_ = enc::Linear(params_, "head.cls", in, data::kNumBins, rng);
  regression_ = enc::Linear(params_, "head.reg", in, 1, rng);
  if (config.zero_init) zero_all(params_);
}

ForwardOutput DeepMatchBaseline::forward(Tape& tape, std::span<const Pair> pairs) const {
  check_pairs(corpus_, pairs, "deepmatch baseline");
  const BatchIndex b = index_batch(pairs);
  Var doc = doctor_mlp_(tape, tape.constant(gather(doctor_features_, b.doctors)));
  Var cat = cat_mlp_(tape, tape.constant(gather(onehots_, b.trials)));
  Var text = text_(tape, tape.constant(gather(tfidf_, b.trials)));
  const std::vector<Var> parts{num::gather_rows(doc, b.doctor_of), num::gather_rows(cat, b.trial_of),
                               num::gather_rows(text, b.trial_of)};
  return heads(tape, num::concat_cols(parts), head_, regression_);
}

// ---- factory ----

const std::vector<std::string>& baseline_kinds() {
  static const std::vector<std::string> kinds{"median", "logreg", "mlp", "lstm", "deepmatch"};
  return kinds;
}

std::unique_ptr<mem::Model> make_baseline(const std::string& kind, const data::Corpus& corpus,
                                          const BaselineConfig& config) {
  if (kind == "median") return std::make_unique<MedianBaseline>(corpus, config);
  if (kind == "logreg") return std::make_unique<FeatureBaseline>(corpus, config, FeatureBaseline::Kind::kLogReg);
  if (kind == "mlp") return std::make_unique<FeatureBaseline>(corpus, config, FeatureBaseline::Kind::kMlp);
  if (kind == "lstm") return std::make_unique<LstmBaseline>(corpus, config);
  if (kind == "deepmatch") return std::make_unique<DeepMatchBaseline>(corpus, config);
  throw ValidationError("unknown baseline kind '" + kind + "'");
}

}  // namespace d2v::base
