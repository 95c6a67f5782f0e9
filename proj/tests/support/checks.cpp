#include "checks.h"

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>

#include "d2v/data/labels.h"
#include "d2v/mem/memory.h"
#include "d2v/mem/trainer.h"
#include "d2v/num/tape.h"

namespace d2v::testing {

using num::ParameterStore;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double shift_from_zero = 0.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) {
    double x = n(rng);
    if (shift_from_zero > 0.0) x += x < 0 ? -shift_from_zero : shift_from_zero;
    t[i] = x;
  }
  return t;
}

// sum(out * R) for a fixed random R, so every output entry carries a
// distinct weight.
Var weighted_sum(Tape& tape, Var out, const Tensor& r) { return num::sum(num::mul(out, tape.constant(r))); }

struct Case {
  ParameterStore store;
  Tensor weights;
  std::function<Var(Tape&, ParameterStore&)> body;
};

using Builder = std::function<void(Case&, std::mt19937_64&)>;

const std::map<std::string, Builder>& builders() {
  static const std::map<std::string, Builder> table = [] {
    std::map<std::string, Builder> m;
    auto binary = [](auto op, std::size_t ar, std::size_t ac, std::size_t br, std::size_t bc, std::size_t orr,
                     std::size_t oc) {
      return [=](Case& c, std::mt19937_64& rng) {
        c.store.add("a", random_matrix(ar, ac, rng));
        c.store.add("b", random_matrix(br, bc, rng));
        c.weights = random_matrix(orr, oc, rng);
        c.body = [op](Tape& t, ParameterStore& s) { return op(t.param(s.get("a")), t.param(s.get("b"))); };
      };
    };
    auto unary = [](auto op, std::size_t r, std::size_t cc, double shift = 0.0) {
      return [=](Case& c, std::mt19937_64& rng) {
        c.store.add("a", random_matrix(r, cc, rng, shift));
        c.weights = random_matrix(r, cc, rng);
        c.body = [op](Tape& t, ParameterStore& s) { return op(t.param(s.get("a"))); };
      };
    };
    m["matmul"] = binary([](Var a, Var b) { return num::matmul(a, b); }, 3, 4, 4, 2, 3, 2);
    m["matmul_nt"] = binary([](Var a, Var b) { return num::matmul_nt(a, b); }, 3, 4, 5, 4, 3, 5);
    m["add"] = binary([](Var a, Var b) { return num::add(a, b); }, 3, 4, 3, 4, 3, 4);
    m["add_row"] = binary([](Var a, Var b) { return num::add_row(a, b); }, 3, 4, 1, 4, 3, 4);
    m["sub"] = binary([](Var a, Var b) { return num::sub(a, b); }, 3, 4, 3, 4, 3, 4);
    m["mul"] = binary([](Var a, Var b) { return num::mul(a, b); }, 3, 4, 3, 4, 3, 4);
    m["concat_cols"] = binary(
        [](Var a, Var b) {
          const Var p[] = {a, b};
          return num::concat_cols(p);
        },
        3, 2, 3, 4, 3, 6);
    m["concat_rows"] = binary(
        [](Var a, Var b) {
          const Var p[] = {a, b};
          return num::concat_rows(p);
        },
        2, 4, 3, 4, 5, 4);
    m["scale"] = unary([](Var a) { return num::scale(a, -1.7); }, 3, 4);
    m["one_minus"] = unary([](Var a) { return num::one_minus(a); }, 3, 4);
    m["tanh"] = unary([](Var a) { return num::tanh(a); }, 3, 4);
    m["sigmoid"] = unary([](Var a) { return num::sigmoid(a); }, 3, 4);
    // Inputs kept at least 0.1 away from the kink.
    m["relu"] = unary([](Var a) { return num::relu(a); }, 3, 4, 0.1);
    m["softmax"] = unary([](Var a) { return num::softmax_rows(a); }, 3, 5);
    m["slice_cols"] = [](Case& c, std::mt19937_64& rng) {
      c.store.add("a", random_matrix(3, 6, rng));
      c.weights = random_matrix(3, 3, rng);
      c.body = [](Tape& t, ParameterStore& s) { return num::slice_cols(t.param(s.get("a")), 2, 3); };
    };
    m["slice_rows"] = [](Case& c, std::mt19937_64& rng) {
      c.store.add("a", random_matrix(5, 3, rng));
      c.weights = random_matrix(2, 3, rng);
      c.body = [](Tape& t, ParameterStore& s) { return num::slice_rows(t.param(s.get("a")), 1, 2); };
    };
    m["gather_rows"] = [](Case& c, std::mt19937_64& rng) {
      c.store.add("a", random_matrix(4, 3, rng));
      c.weights = random_matrix(5, 3, rng);
      c.body = [](Tape& t, ParameterStore& s) {
        static const std::size_t idx[] = {3, 0, 3, 1, 2};
        return num::gather_rows(t.param(s.get("a")), idx);
      };
    };
    m["embedding_bag"] = [](Case& c, std::mt19937_64& rng) {
      c.store.add("table", random_matrix(6, 3, rng));
      c.weights = random_matrix(3, 3, rng);
      c.body = [](Tape& t, ParameterStore& s) {
        static const std::vector<std::vector<std::uint32_t>> bags = {{0, 2}, {5}, {1, 2, 4}};
        return num::embedding_bag(t.param(s.get("table")), bags);
      };
    };
    m["row_sum"] = [](Case& c, std::mt19937_64& rng) {
      c.store.add("a", random_matrix(3, 4, rng));
      c.weights = random_matrix(3, 1, rng);
      c.body = [](Tape& t, ParameterStore& s) { return num::row_sum(t.param(s.get("a"))); };
    };
    m["mean"] = [](Case& c, std::mt19937_64& rng) {
      c.store.add("a", random_matrix(3, 4, rng));
      c.store.add("b", random_matrix(3, 4, rng));
      c.body = [](Tape& t, ParameterStore& s) {
        return num::mean(num::mul(t.param(s.get("a")), t.param(s.get("b"))));
      };
    };
    m["square_sum"] = [](Case& c, std::mt19937_64& rng) {
      c.store.add("a", random_matrix(3, 4, rng));
      c.body = [](Tape& t, ParameterStore& s) { return num::square_sum(t.param(s.get("a"))); };
    };
    m["segment_softmax"] = [](Case& c, std::mt19937_64& rng) {
      c.store.add("a", random_matrix(6, 1, rng));
      c.weights = random_matrix(6, 1, rng);
      c.body = [](Tape& t, ParameterStore& s) {
        static const std::size_t off[] = {0, 1, 4, 6};
        return num::segment_softmax(t.param(s.get("a")), off);
      };
    };
    m["segment_weighted_sum"] = [](Case& c, std::mt19937_64& rng) {
      c.store.add("v", random_matrix(6, 3, rng));
      c.store.add("w", random_matrix(6, 1, rng));
      c.weights = random_matrix(3, 3, rng);
      c.body = [](Tape& t, ParameterStore& s) {
        static const std::size_t off[] = {0, 2, 3, 6};
        return num::segment_weighted_sum(t.param(s.get("v")), t.param(s.get("w")), off);
      };
    };
    m["cross_entropy"] = [](Case& c, std::mt19937_64& rng) {
      c.store.add("logits", random_matrix(4, 5, rng));
      c.body = [](Tape& t, ParameterStore& s) {
        static const int targets[] = {0, 3, 4, 3};
        return num::cross_entropy(num::softmax_rows(t.param(s.get("logits"))), targets);
      };
    };
    m["mse"] = [](Case& c, std::mt19937_64& rng) {
      c.store.add("a", random_matrix(5, 1, rng));
      c.body = [](Tape& t, ParameterStore& s) {
        static const double target[] = {0.1, -0.4, 2.0, 0.0, 1.3};
        return num::mse(t.param(s.get("a")), target);
      };
    };
    return m;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& primitive_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : builders()) v.push_back(k);
    return v;
  }();
  return names;
}

num::GradCheckResult check_primitive(const std::string& op, std::uint64_t seed) {
  auto it = builders().find(op);
  if (it == builders().end()) throw std::invalid_argument("unknown primitive " + op);
  std::mt19937_64 rng(seed);
  Case c;
  it->second(c, rng);
  const bool scalar_body = c.weights.size() == 0;
  auto f = [&](Tape& t) {
    Var out = c.body(t, c.store);
    return scalar_body ? out : weighted_sum(t, out, c.weights);
  };
  return num::finite_diff_check(f, c.store, 1e-5);
}

double brute_force_pr_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  long double positives = 0;
  for (int y : labels) positives += y;
  long double area = 0, prev_recall = 0;
  for (double t : thresholds) {
    long double tp = 0, selected = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (scores[i] >= t) {
        selected += 1;
        tp += labels[i];
      }
    const long double recall = tp / positives;
    area += (tp / selected) * (recall - prev_recall);
    prev_recall = recall;
  }
  return static_cast<double>(area);
}

double two_pass_r2(const std::vector<double>& predicted, const std::vector<double>& actual) {
  long double mean = 0;
  for (double y : actual) mean += y;
  mean /= actual.size();
  long double res = 0, tot = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    res += (actual[i] - static_cast<long double>(predicted[i])) * (actual[i] - static_cast<long double>(predicted[i]));
    tot += (actual[i] - mean) * (actual[i] - mean);
  }
  return static_cast<double>(1 - res / tot);
}

double two_pass_mse(const std::vector<double>& predicted, const std::vector<double>& actual) {
  long double res = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const long double d = actual[i] - static_cast<long double>(predicted[i]);
    res += d * d;
  }
  return static_cast<double>(res / actual.size());
}

namespace {

struct RandomMemory {
  ParameterStore store;
  mem::MemoryNetwork net;
  RandomMemory(std::mt19937_64& rng, bool identity) {
    mem::MemoryConfig cfg;
    cfg.input_dim = 6;
    cfg.layers = {5, 4};
    cfg.query_dim = 3;
    cfg.identity_generalization = identity;
    net = mem::MemoryNetwork(store, cfg, rng);
    std::normal_distribution<double> n(0.0, 0.8);
    for (std::size_t i = 0; i < store.size(); ++i)
      for (auto& v : store[i].value.values()) v = n(rng);
  }
};

}  // namespace

MemoryInvariantReport check_memory_invariants(std::uint64_t seed, bool identity_generalization) {
  std::mt19937_64 rng(seed);
  RandomMemory m(rng, identity_generalization);
  std::vector<std::size_t> offsets{0};
  const std::size_t doctors = 1 + rng() % 4;
  for (std::size_t j = 0; j < doctors; ++j) offsets.push_back(offsets.back() + 1 + rng() % 6);
  const std::size_t queries = 1 + rng() % 5;
  std::vector<std::size_t> doctor_of;
  for (std::size_t s = 0; s < queries; ++s) doctor_of.push_back(rng() % doctors);
  Tape t;
  const auto bank = m.net.build(t, t.constant(random_matrix(offsets.back(), 6, rng)), offsets);
  const auto r = m.net.query(t, bank, t.constant(random_matrix(queries, 3, rng)), doctor_of);
  const Tensor& a = r.attention.value();
  const Tensor& emb = r.response.value();
  const Tensor& rows = bank.input.value();
  MemoryInvariantReport rep;
  for (std::size_t s = 0; s < queries; ++s) {
    double sum = 0.0;
    for (auto i = r.offsets[s]; i < r.offsets[s + 1]; ++i) {
      sum += a[i];
      rep.min_attention = std::min(rep.min_attention, a[i]);
    }
    rep.attention_sum_error = std::max(rep.attention_sum_error, std::abs(sum - 1.0));
    const auto j = doctor_of[s];
    for (std::size_t c = 0; c < emb.cols(); ++c) {
      double lo = rows.at(offsets[j], c), hi = lo;
      for (auto k = offsets[j]; k < offsets[j + 1]; ++k) {
        lo = std::min(lo, rows.at(k, c));
        hi = std::max(hi, rows.at(k, c));
      }
      const double x = emb.at(s, c);
      rep.bound_violation = std::max({rep.bound_violation, lo - x, x - hi});
    }
  }
  return rep;
}

double memory_permutation_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RandomMemory m(rng, true);
  const std::size_t k = 2 + rng() % 7;
  const Tensor patients = random_matrix(k, 6, rng);
  const Tensor query = random_matrix(1, 3, rng);
  std::vector<std::size_t> perm(k);
  for (std::size_t i = 0; i < k; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor permuted = Tensor::matrix(k, 6);
  for (std::size_t i = 0; i < k; ++i)
    std::copy_n(patients.row_span(perm[i]).begin(), 6, permuted.row_span(i).begin());
  const std::vector<std::size_t> offsets{0, k}, doctor_of{0};
  Tape t;
  const auto r1 = m.net.query(t, m.net.build(t, t.constant(patients), offsets), t.constant(query), doctor_of);
  const auto r2 = m.net.query(t, m.net.build(t, t.constant(permuted), offsets), t.constant(query), doctor_of);
  double err = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    err = std::max(err, std::abs(r2.attention.value()[i] - r1.attention.value()[perm[i]]));
  for (std::size_t c = 0; c < r1.response.cols(); ++c)
    err = std::max(err, std::abs(r1.response.value()[c] - r2.response.value()[c]));
  return err;
}

bool memory_argmax_flips() {
  std::mt19937_64 rng(1);
  ParameterStore store;
  mem::MemoryConfig cfg;
  cfg.input_dim = 2;
  cfg.layers = {2};
  cfg.query_dim = 2;
  cfg.identity_generalization = true;
  mem::MemoryNetwork net(store, cfg, rng);
  store.get("memory.input.0.w").value.values() = {1, 0, 0, 1};
  store.get("memory.input.0.b").value.values() = {0, 0};
  store.get("memory.w_q.w").value.values() = {1, 0, 0, 1};
  // Patient 0 points along the first axis, patient 1 along the second.
  const Tensor rows({2, 2}, std::vector<double>{3, 0, 0, 3});
  const Tensor queries({2, 2}, std::vector<double>{1, 0, 0, 1});
  const std::vector<std::size_t> offsets{0, 2}, doctor_of{0, 0};
  Tape t;
  const auto r = net.query(t, net.build(t, t.constant(rows), offsets), t.constant(queries), doctor_of);
  const Tensor& a = r.attention.value();
  const bool first = a[0] > a[1];
  const bool second = a[3] > a[2];
  return first && second;
}

data::Corpus toy_corpus() {
  data::Corpus c;
  c.vocab = data::CodeVocabulary({"d0", "d1", "d2", "d3"}, {"p0", "p1"}, {"m0", "m1", "m2"});
  c.categories = {{"phase", {"1", "2"}}, {"area", {"a", "b"}}};
  c.static_feature_names = {"years", "specialty=a"};
  auto visit = [](std::vector<std::uint32_t> dx, std::vector<std::uint32_t> px, std::vector<std::uint32_t> rx,
                  std::uint32_t t) {
    data::Visit v;
    v.diagnosis = std::move(dx);
    v.procedure = std::move(px);
    v.medication = std::move(rx);
    v.time_index = t;
    return v;
  };
  data::DoctorRecord a{"DOC0", "US", {}, {0.4, 1.0}, {}};
  a.patients.push_back({{visit({0, 1}, {0}, {2}, 0), visit({1}, {}, {0, 2}, 3)}});
  a.patients.push_back({{visit({3}, {1}, {}, 2)}});
  data::DoctorRecord b{"DOC1", "US", {}, {0.8, 0.0}, {}};
  b.patients.push_back({{visit({2}, {}, {1}, 1), visit({0, 2}, {1}, {1}, 2), visit({3}, {0}, {0}, 5)}});
  b.patients.push_back({{visit({1, 3}, {}, {2}, 4), visit({0}, {0, 1}, {}, 6)}});
  c.doctors = {std::move(a), std::move(b)};
  c.trials.push_back({"TR0", {0, 0}, {"tumor", "screening", "adult"}, {{"DOC0", 9, 1, 4.0}, {"DOC1", 3, 0, 6.0}}, {}});
  c.trials.push_back({"TR1", {1, 1}, {"cardiac", "adult"}, {{"DOC0", 2, 1, 5.0}, {"DOC1", 7, 2, 2.0}}, {}});
  data::rebuild_samples(c);
  c.validate();
  return c;
}

mem::Doctor2VecConfig toy_doctor2vec_config(std::uint64_t seed) {
  mem::Doctor2VecConfig cfg;
  cfg.visit_dim = 3;
  cfg.hidden = 2;
  cfg.query_dim = 3;
  cfg.categorical_layers = {4, 3};
  cfg.memory_layers = {4, 3};
  cfg.text_dim = 8;
  cfg.seed = seed;
  return cfg;
}

num::GradCheckResult check_doctor2vec_gradient(std::uint64_t seed) {
  const data::Corpus corpus = toy_corpus();
  mem::Doctor2Vec model(corpus, toy_doctor2vec_config(seed));
  // Unit-scale weights and zero biases keep every gradient entry well above
  // the finite-difference noise floor; Xavier scales leave the memory
  // recurrence gradients near 1e-11.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> w(0.0, 1.0);
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    auto& p = model.params()[i];
    const bool bias = p.name.ends_with(".b");
    for (auto& v : p.value.values()) v = bias ? 0.0 : w(rng);
  }
  std::vector<std::size_t> all(corpus.samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto pairs = mem::pairs_of(corpus, all);
  std::vector<int> classes;
  std::vector<double> rates;
  for (const auto& s : corpus.samples) {
    classes.push_back(s.label.bin);
    rates.push_back(s.label.normalized_rate);
  }
  auto f = [&](Tape& t) { return mem::joint_loss(model.forward(t, pairs), classes, rates, 1.0, 1.0); };
  return num::finite_diff_check(f, model.params(), 1e-3);
}

}  // namespace d2v::testing
