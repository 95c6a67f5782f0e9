#include "d2v/syn/generator.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "d2v/data/labels.h"
#include "d2v/error.h"

namespace d2v::syn {

using data::CodeSpace;

namespace {

constexpr const char* kAreaNames[] = {"cardiology",  "oncology",     "neurology",  "endocrinology",
                                      "pulmonology", "nephrology",   "rheumatology", "infectious"};

const std::vector<std::vector<std::string>>& area_keywords() {
  static const std::vector<std::vector<std::string>> kw = {
      {"heart", "cardiac", "arrhythmia", "atrial", "fibrillation", "hypertension", "coronary", "myocardial",
       "infarction", "statin", "anticoagulant", "ejection", "angina", "stent"},
      {"tumor", "carcinoma", "metastatic", "chemotherapy", "oncology", "lymphoma", "cisplatin", "gemcitabine",
       "radiotherapy", "malignancy", "biopsy", "remission", "neoplasm", "staging"},
      {"alzheimer", "dementia", "cognitive", "neurological", "seizure", "epilepsy", "parkinson", "stroke",
       "migraine", "neuropathy", "amyloid", "memory", "mri", "tremor"},
      {"diabetes", "insulin", "glucose", "hba1c", "thyroid", "metformin", "obesity", "endocrine", "glycemic",
       "pancreatic", "hormone", "lipid", "adrenal", "pituitary"},
      {"asthma", "copd", "pulmonary", "respiratory", "bronchial", "inhaler", "spirometry", "fev1", "lung",
       "oxygen", "dyspnea", "emphysema", "airway", "bronchodilator"},
      {"renal", "kidney", "dialysis", "creatinine", "glomerular", "nephropathy", "proteinuria", "egfr",
       "transplant", "urinary", "electrolyte", "nephrotic", "uremic", "filtration"},
      {"arthritis", "rheumatoid", "lupus", "autoimmune", "joint", "inflammation", "psoriatic", "synovial",
       "biologic", "methotrexate", "spondylitis", "flare", "cartilage", "tnf"},
      {"infection", "antibiotic", "viral", "bacterial", "hiv", "hepatitis", "vaccine", "sepsis", "antiviral",
       "pathogen", "fever", "immunization", "resistant", "culture"},
  };
  return kw;
}

const std::vector<std::string>& boilerplate() {
  static const std::vector<std::string> b = {"inclusion", "criteria", "patients", "aged", "years", "or",
                                             "older", "with", "confirmed", "diagnosis", "of", "exclusion",
                                             "pregnant", "women", "prior", "treatment", "informed", "consent",
                                             "willing", "to", "comply", "study", "procedures"};
  return b;
}

std::vector<std::string> keywords_for(int topic) {
  if (topic < static_cast<int>(area_keywords().size())) return area_keywords()[topic];
  std::vector<std::string> out;
  for (int j = 0; j < 14; ++j) out.push_back("area" + std::to_string(topic) + "_term" + std::to_string(j));
  return out;
}

std::string code_name(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04d", prefix, i);
  return buf;
}

std::vector<double> dirichlet(std::span<const double> alpha, std::mt19937_64& rng) {
  std::vector<double> x(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    std::gamma_distribution<double> g(std::max(alpha[i], 1e-3), 1.0);
    total += (x[i] = g(rng));
  }
  if (!(total > 0.0)) {
    std::fill(x.begin(), x.end(), 1.0 / static_cast<double>(x.size()));
    return x;
  }
  for (auto& v : x) v /= total;
  return x;
}

std::size_t sample_discrete(std::span<const double> probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng), acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (r < acc) return i;
  }
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0) return i;
  return 0;
}

int uniform_int(int lo, int hi, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng);
}

int truncated_poisson(double mean, int max, std::mt19937_64& rng) {
  std::poisson_distribution<int> p(mean);
  for (int i = 0; i < 1000; ++i) {
    const int n = p(rng);
    if (n <= max) return n;
  }
  return max;
}

// Per-space code layout: background codes first, then one block per topic.
struct SpaceLayout {
  int n_background = 0;
  std::vector<std::pair<int, int>> topic_blocks;  // [begin, end)
};

SpaceLayout layout_for(int size, const GenConfig& cfg) {
  SpaceLayout l;
  l.n_background = std::max(1, static_cast<int>(std::lround(cfg.background_fraction * size)));
  const int rest = size - l.n_background;
  for (int t = 0; t < cfg.n_topics; ++t) {
    const int b = l.n_background + rest * t / cfg.n_topics;
    const int e = l.n_background + rest * (t + 1) / cfg.n_topics;
    l.topic_blocks.emplace_back(b, e);
  }
  return l;
}

TopicModel build_topic_model(const GenConfig& cfg, const std::array<SpaceLayout, 3>& layouts) {
  TopicModel tm;
  for (int s = 0; s < 3; ++s) {
    const int size = cfg.vocab_sizes[s];
    const auto& l = layouts[s];
    std::vector<double> bg(size, 0.0);
    double z = 0.0;
    for (int i = 0; i < l.n_background; ++i) z += (bg[i] = 1.0 / (i + 1.0));
    for (auto& v : bg) v /= z;
    tm.background_probs[s] = std::move(bg);
    for (int t = 0; t < cfg.n_topics; ++t) {
      std::vector<double> p(size, 0.0);
      const auto [b, e] = l.topic_blocks[t];
      for (int i = b; i < e; ++i) p[i] = 1.0 / (e - b);
      tm.topic_code_probs[s].push_back(std::move(p));
    }
  }
  return tm;
}

std::vector<std::uint32_t> draw_codes(int space, int count, const GenConfig& cfg, const TopicModel& tm,
                                      std::span<const double> patient_mix, std::mt19937_64& rng) {
  std::set<std::uint32_t> codes;
  std::bernoulli_distribution use_bg(cfg.background_weight);
  count = std::min(count, cfg.vocab_sizes[space]);
  for (int guard = 0; static_cast<int>(codes.size()) < count && guard < 50 * count + 100; ++guard) {
    std::size_t code;
    if (use_bg(rng)) {
      code = sample_discrete(tm.background_probs[space], rng);
    } else {
      const auto topic = sample_discrete(patient_mix, rng);
      code = sample_discrete(tm.topic_code_probs[space][topic], rng);
    }
    codes.insert(static_cast<std::uint32_t>(code));
  }
  return {codes.begin(), codes.end()};
}

// Monotone piecewise-linear map sending the pooled quantiles of `pooled` at
// the target cumulative shares onto the bin boundaries 0.2, 0.4, 0.6, 0.8.
struct Warp {
  std::vector<double> xs{0.0, 1.0};
  std::vector<double> ys{0.0, 1.0};
  double operator()(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    auto it = std::upper_bound(xs.begin(), xs.end(), u);
    const std::size_t k = static_cast<std::size_t>(it - xs.begin());
    const double t = (u - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return ys[k - 1] + t * (ys[k] - ys[k - 1]);
  }
};

Warp fit_warp(std::vector<double> pooled, const std::array<double, 5>& target) {
  Warp w;
  if (pooled.size() < 10) return w;
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> xs{0.0}, ys{0.0};
  double cum = 0.0;
  for (int b = 0; b < 4; ++b) {
    cum += target[b];
    const double pos = cum * static_cast<double>(pooled.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, pooled.size() - 1);
    const double x = pooled[lo] + (pos - static_cast<double>(lo)) * (pooled[hi] - pooled[lo]);
    if (!(x > xs.back() && x < 1.0)) return Warp{};
    xs.push_back(x);
    ys.push_back(0.2 * (b + 1));
  }
  xs.push_back(1.0);
  ys.push_back(1.0);
  w.xs = std::move(xs);
  w.ys = std::move(ys);
  return w;
}

// Integer counts and a window whose quotient reproduces `rate` exactly when
// a representable window exists.
data::RawEnrollment counts_for(const std::string& doctor, double rate, int net, int discontinued) {
  double w = static_cast<double>(net) / rate;
  double best = w;
  for (int step = 0; step < 8; ++step) {
    if (static_cast<double>(net) / w == rate) {
      best = w;
      break;
    }
    w = std::nextafter(w, (static_cast<double>(net) / w > rate) ? INFINITY : 0.0);
  }
  return {doctor, net + discontinued, discontinued, best};
}

data::Corpus build(const GenConfig& cfg, std::uint64_t seed, TopicModel& tm_out) {
  std::mt19937_64 rng(seed);
  data::Corpus c;
  c.header.seed = cfg.seed;

  std::array<std::vector<std::string>, 3> names;
  const char* prefixes[] = {"DX", "PX", "RX"};
  for (int s = 0; s < 3; ++s)
    for (int i = 0; i < cfg.vocab_sizes[s]; ++i) names[s].push_back(code_name(prefixes[s], i));
  c.vocab = data::CodeVocabulary(names[0], names[1], names[2]);

  std::array<SpaceLayout, 3> layouts;
  for (int s = 0; s < 3; ++s) layouts[s] = layout_for(cfg.vocab_sizes[s], cfg);
  TopicModel tm = build_topic_model(cfg, layouts);

  std::vector<std::string> areas;
  for (int t = 0; t < cfg.n_topics; ++t) areas.push_back(topic_name(t));
  c.categories = {
      {"phase", {"I", "II", "III", "IV"}},
      {"area", areas},
      {"country", cfg.countries},
      {"study_type", {"interventional", "observational"}},
      {"prevalence", {"common", "rare"}},
  };
  const std::vector<std::string> education = {"md", "md_phd", "fellowship"};
  c.static_feature_names.push_back("practice_years_norm");
  for (const auto& a : areas) c.static_feature_names.push_back("specialty=" + a);
  for (const auto& e : education) c.static_feature_names.push_back("education=" + e);

  // Doctors.
  std::vector<std::vector<std::size_t>> by_country(cfg.countries.size());
  const std::vector<double> doc_alpha(cfg.n_topics, cfg.doctor_concentration);
  double wsum = std::accumulate(cfg.country_weights.begin(), cfg.country_weights.end(), 0.0);
  std::vector<double> cprob;
  for (double w : cfg.country_weights) cprob.push_back(w / wsum);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int d = 0; d < cfg.n_doctors; ++d) {
    data::DoctorRecord doc;
    doc.id = code_name("DOC", d);
    const auto country = sample_discrete(cprob, rng);
    doc.country = cfg.countries[country];
    by_country[country].push_back(static_cast<std::size_t>(d));
    const auto pi = dirichlet(doc_alpha, rng);
    const int k = uniform_int(cfg.patients_per_doctor.lo, cfg.patients_per_doctor.hi, rng);
    std::vector<double> realized(cfg.n_topics, 0.0);
    std::vector<std::pair<std::uint32_t, data::Patient>> patients;
    for (int p = 0; p < k; ++p) {
      std::vector<double> alpha(cfg.n_topics);
      for (int t = 0; t < cfg.n_topics; ++t) alpha[t] = cfg.patient_concentration * pi[t];
      const auto theta = dirichlet(alpha, rng);
      for (int t = 0; t < cfg.n_topics; ++t) realized[t] += theta[t] / k;
      data::Patient patient;
      auto time = static_cast<std::uint32_t>(uniform_int(0, 60, rng));
      const std::uint32_t start = time;
      const int nv = uniform_int(cfg.visits_per_patient.lo, cfg.visits_per_patient.hi, rng);
      for (int v = 0; v < nv; ++v) {
        data::Visit visit;
        visit.time_index = time;
        time += static_cast<std::uint32_t>(uniform_int(1, 6, rng));
        do {
          visit.diagnosis = draw_codes(0, truncated_poisson(cfg.mean_codes[0], cfg.max_codes[0], rng), cfg, tm, theta, rng);
          visit.procedure = draw_codes(1, truncated_poisson(cfg.mean_codes[1], cfg.max_codes[1], rng), cfg, tm, theta, rng);
          visit.medication = draw_codes(2, truncated_poisson(cfg.mean_codes[2], cfg.max_codes[2], rng), cfg, tm, theta, rng);
        } while (visit.code_count() == 0);
        patient.visits.push_back(std::move(visit));
      }
      patients.emplace_back(start, std::move(patient));
    }
    std::stable_sort(patients.begin(), patients.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [_, p] : patients) doc.patients.push_back(std::move(p));

    const auto dominant = static_cast<int>(std::max_element(realized.begin(), realized.end()) - realized.begin());
    const int specialty = unit(rng) < 0.8 ? dominant : uniform_int(0, cfg.n_topics - 1, rng);
    const int edu = uniform_int(0, static_cast<int>(education.size()) - 1, rng);
    doc.static_features.push_back(uniform_int(1, 40, rng) / 50.0);
    for (int t = 0; t < cfg.n_topics; ++t) doc.static_features.push_back(t == specialty ? 1.0 : 0.0);
    for (int e = 0; e < static_cast<int>(education.size()); ++e) doc.static_features.push_back(e == edu ? 1.0 : 0.0);
    doc.planted_topics = realized;
    tm.doctor_mixtures.push_back(realized);
    c.doctors.push_back(std::move(doc));
  }

  // Trials and their planted scores.
  const int first_rare = cfg.n_topics - std::min(cfg.n_rare_topics, cfg.n_topics - 1);
  std::vector<double> topic_w(cfg.n_topics, 1.0);
  for (int t = first_rare; t < cfg.n_topics; ++t) topic_w[t] = 0.5;
  const double tw = std::accumulate(topic_w.begin(), topic_w.end(), 0.0);
  for (auto& w : topic_w) w /= tw;
  std::vector<double> usable_cprob = cprob;
  for (std::size_t k = 0; k < by_country.size(); ++k)
    if (by_country[k].size() < 2) usable_cprob[k] = 0.0;
  const double usum = std::accumulate(usable_cprob.begin(), usable_cprob.end(), 0.0);
  if (!(usum > 0.0)) throw ValidationError("no country has at least two doctors");
  for (auto& w : usable_cprob) w /= usum;

  std::vector<std::vector<double>> trial_u;
  std::vector<bool> degenerate;
  for (int ti = 0; ti < cfg.n_trials; ++ti) {
    data::Trial trial;
    trial.id = code_name("TRIAL", ti);
    const int topic = static_cast<int>(sample_discrete(topic_w, rng));
    const auto country = sample_discrete(usable_cprob, rng);
    const bool rare = topic >= first_rare;
    trial.categorical = {static_cast<std::uint32_t>(uniform_int(0, 3, rng)), static_cast<std::uint32_t>(topic),
                         static_cast<std::uint32_t>(country), static_cast<std::uint32_t>(unit(rng) < 0.8 ? 0 : 1),
                         static_cast<std::uint32_t>(rare ? 1 : 0)};
    std::vector<double> topic_vec(cfg.n_topics, 0.0);
    topic_vec[topic] = 1.0;
    trial.planted_topics = topic_vec;
    tm.trial_topics.push_back(topic_vec);

    const auto& bp = boilerplate();
    const auto kw = keywords_for(topic);
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < 10; ++i) tokens.push_back(bp[static_cast<std::size_t>(uniform_int(0, static_cast<int>(bp.size()) - 1, rng))]);
    for (int i = 0; i < 10; ++i) tokens.push_back(kw[static_cast<std::size_t>(uniform_int(0, static_cast<int>(kw.size()) - 1, rng))]);
    for (int i = 0; i < 2 && cfg.n_topics > 1; ++i) {
      const auto other = keywords_for(uniform_int(0, cfg.n_topics - 1, rng));
      tokens.push_back(other[static_cast<std::size_t>(uniform_int(0, static_cast<int>(other.size()) - 1, rng))]);
    }
    std::shuffle(tokens.begin(), tokens.end(), rng);
    trial.text_tokens = std::move(tokens);

    auto pool = by_country[country];
    std::shuffle(pool.begin(), pool.end(), rng);
    const int want = uniform_int(cfg.investigators_per_trial.lo, cfg.investigators_per_trial.hi, rng);
    pool.resize(std::min<std::size_t>(pool.size(), static_cast<std::size_t>(want)));
    std::sort(pool.begin(), pool.end());
    std::vector<double> scores;
    for (auto d : pool) {
      trial.enrollments.push_back({c.doctors[d].id, 0, 0, 1.0});
      scores.push_back(topic_affinity(c.doctors[d].planted_topics, topic_vec) + cfg.noise_std * noise(rng));
    }
    const auto u = data::normalize_rates(scores);
    degenerate.push_back(std::all_of(scores.begin(), scores.end(), [&](double s) { return s == scores.front(); }));
    trial_u.push_back(u);
    c.trials.push_back(std::move(trial));
  }

  std::vector<double> pooled;
  for (std::size_t i = 0; i < trial_u.size(); ++i)
    if (!degenerate[i]) pooled.insert(pooled.end(), trial_u[i].begin(), trial_u[i].end());
  const Warp warp = fit_warp(pooled, cfg.target_bin_distribution);

  std::uniform_real_distribution<double> scale_d(0.5, 3.0), offset_d(0.05, 0.5);
  for (std::size_t i = 0; i < c.trials.size(); ++i) {
    auto& trial = c.trials[i];
    const double a = scale_d(rng), b = offset_d(rng);
    const int shared_net = uniform_int(1, 30, rng);
    for (std::size_t k = 0; k < trial.enrollments.size(); ++k) {
      const double rate = a * warp(trial_u[i][k]) + b;
      const int net = degenerate[i] ? shared_net : uniform_int(1, 30, rng);
      const int disc = degenerate[i] ? 0 : uniform_int(0, 5, rng);
      trial.enrollments[k] = counts_for(trial.enrollments[k].doctor_id, rate, net, disc);
    }
  }
  data::rebuild_samples(c);
  c.validate();
  tm_out = std::move(tm);
  return c;
}

}  // namespace

void GenConfig::validate() const {
  auto positive_range = [](const IntRange& r, const char* what) {
    if (r.lo < 1 || r.hi < r.lo) throw ValidationError(std::string("invalid range for ") + what);
  };
  if (n_doctors < 2 || n_trials < 1) throw ValidationError("n_doctors must be >= 2 and n_trials >= 1");
  positive_range(patients_per_doctor, "patients_per_doctor");
  positive_range(visits_per_patient, "visits_per_patient");
  positive_range(investigators_per_trial, "investigators_per_trial");
  if (n_topics < 1) throw ValidationError("n_topics must be positive");
  if (n_rare_topics < 0) throw ValidationError("n_rare_topics must be nonnegative");
  for (int s = 0; s < 3; ++s) {
    const int bg = std::max(1, static_cast<int>(std::lround(background_fraction * vocab_sizes[s])));
    if (vocab_sizes[s] - bg < n_topics)
      throw ValidationError("vocabulary too small for the topic layout in space " + std::to_string(s));
    if (mean_codes[s] < 0 || max_codes[s] < 0) throw ValidationError("code count parameters must be nonnegative");
  }
  if (noise_std < 0) throw ValidationError("noise_std must be nonnegative");
  double total = 0.0;
  for (double p : target_bin_distribution) {
    if (p < 0) throw ValidationError("target_bin_distribution entries must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("target_bin_distribution must sum to 1");
  if (countries.empty() || countries.size() != country_weights.size())
    throw ValidationError("countries and country_weights must be nonempty and the same length");
  if (background_weight < 0 || background_weight >= 1) throw ValidationError("background_weight must be in [0,1)");
  if (max_retries < 1) throw ValidationError("max_retries must be positive");
}

GeneratedCorpus generate(const GenConfig& config) {
  config.validate();
  std::array<double, 5> last{};
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    // splitmix-style stream separation per attempt
    std::uint64_t z = config.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(attempt);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    TopicModel tm;
    data::Corpus corpus = build(config, z, tm);
    last = bin_distribution(corpus);
    bool has_spread = false;
    for (const auto& s : corpus.samples)
      if (s.label.normalized_rate != 0.5) has_spread = true;
    bool ok = true;
    for (int b = 0; b < 5; ++b)
      if (std::abs(last[b] - config.target_bin_distribution[b]) > config.calibration_tolerance) ok = false;
    if (ok || !has_spread) return GeneratedCorpus{std::move(corpus), std::move(tm), last, attempt + 1};
  }
  std::ostringstream os;
  os << "bin calibration failed after " << config.max_retries << " attempts; achieved [";
  for (int b = 0; b < 5; ++b) os << (b ? ", " : "") << last[b];
  os << "]";
  throw ValidationError(os.str());
}

double topic_affinity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ValidationError("topic vectors must have equal nonzero length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

double planted_affinity(const data::Corpus& corpus, const std::string& doctor_id, const std::string& trial_id) {
  if (!corpus.has_doctor(doctor_id)) throw ValidationError("doctor " + doctor_id + " is not part of this corpus");
  if (!corpus.has_trial(trial_id)) throw ValidationError("trial " + trial_id + " is not part of this corpus");
  const auto& d = corpus.doctors[corpus.doctor_index(doctor_id)];
  const auto& t = corpus.trials[corpus.trial_index(trial_id)];
  if (d.planted_topics.empty() || t.planted_topics.empty())
    throw ValidationError("corpus carries no planted topics for " + doctor_id + "/" + trial_id);
  return topic_affinity(d.planted_topics, t.planted_topics);
}

std::array<double, 5> bin_distribution(const data::Corpus& corpus) {
  std::array<double, 5> out{};
  if (corpus.samples.empty()) return out;
  for (const auto& s : corpus.samples) out[static_cast<std::size_t>(s.label.bin)] += 1.0;
  for (auto& v : out) v /= static_cast<double>(corpus.samples.size());
  return out;
}

std::string topic_name(int topic) {
  if (topic >= 0 && topic < static_cast<int>(std::size(kAreaNames))) return kAreaNames[topic];
  return "area" + std::to_string(topic);
}

}  // namespace d2v::syn
