#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "d2v/data/corpus_io.h"
#include "d2v/data/labels.h"
#include "d2v/data/split.h"
#include "d2v/error.h"
#include "d2v/syn/generator.h"

namespace d2v::data {
namespace {

TEST(EnrollmentRateTest, Formula) {
  EXPECT_DOUBLE_EQ(compute_enrollment_rate(12, 2, 5.0), 2.0);
  EXPECT_DOUBLE_EQ(compute_enrollment_rate(7, 7, 3.0), 0.0);
  EXPECT_DOUBLE_EQ(compute_enrollment_rate(5, 1, 0.5), 8.0);
}

TEST(EnrollmentRateTest, RejectsInvalidInputs) {
  EXPECT_THROW(compute_enrollment_rate(5, 1, 0.0), ValidationError);
  EXPECT_THROW(compute_enrollment_rate(5, 1, -1.0), ValidationError);
  EXPECT_THROW(compute_enrollment_rate(3, 4, 1.0), ValidationError);
  EXPECT_THROW(compute_enrollment_rate(-1, -2, 1.0), ValidationError);
}

TEST(NormalizeRatesTest, MinMax) {
  const std::vector<double> r = {2.0, 0.0, 1.0};
  EXPECT_EQ(normalize_rates(r), (std::vector<double>{1.0, 0.0, 0.5}));
}

TEST(NormalizeRatesTest, DegenerateCasesMapToHalf) {
  EXPECT_EQ(normalize_rates(std::vector<double>{3.0}), (std::vector<double>{0.5}));
  EXPECT_EQ(normalize_rates(std::vector<double>{4.0, 4.0}), (std::vector<double>{0.5, 0.5}));
}

TEST(BinRateTest, BoundariesAreLeftInclusive) {
  EXPECT_EQ(bin_rate(0.45), 2);
  EXPECT_EQ(bin_rate(0.2), 1);
  EXPECT_EQ(bin_rate(0.0), 0);
  EXPECT_EQ(bin_rate(0.19999999999999998), 0);
  EXPECT_EQ(bin_rate(0.4), 2);
  EXPECT_EQ(bin_rate(0.6), 3);
  EXPECT_EQ(bin_rate(0.8), 4);
  EXPECT_EQ(bin_rate(1.0), 4);
}

TEST(BinRateTest, OutOfRangeIsValidationError) {
  EXPECT_THROW(bin_rate(-0.01), ValidationError);
  EXPECT_THROW(bin_rate(1.0000001), ValidationError);
  EXPECT_THROW(bin_rate(std::nan("")), ValidationError);
}

TEST(LabelPipelineTest, RandomTrialsSatisfyInvariants) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> n_doc(1, 12), count(0, 40);
  std::uniform_real_distribution<double> window(0.1, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> raw;
    const int n = n_doc(rng);
    for (int i = 0; i < n; ++i) {
      const int a = count(rng), b = count(rng);
      raw.push_back(compute_enrollment_rate(std::max(a, b), std::min(a, b), window(rng)));
    }
    const auto norm = normalize_rates(raw);
    const bool distinct = std::set<double>(raw.begin(), raw.end()).size() >= 2;
    ASSERT_EQ(norm.size(), raw.size());
    for (std::size_t i = 0; i < norm.size(); ++i) {
      ASSERT_GE(norm[i], 0.0);
      ASSERT_LE(norm[i], 1.0);
      for (std::size_t j = 0; j < norm.size(); ++j)
        if (raw[i] < raw[j]) ASSERT_LE(bin_rate(norm[i]), bin_rate(norm[j]));
    }
    if (distinct) {
      EXPECT_EQ(*std::min_element(norm.begin(), norm.end()), 0.0);
      EXPECT_EQ(*std::max_element(norm.begin(), norm.end()), 1.0);
    }
  }
}

Corpus small_corpus(int trials = 12) {
  syn::GenConfig cfg;
  cfg.n_doctors = 40;
  cfg.n_trials = trials;
  cfg.investigators_per_trial = {6, 10};
  cfg.seed = 5;
  cfg.calibration_tolerance = 1.0;
  return syn::generate_corpus(cfg);
}

TEST(SplitTest, TenTrialsGiveSevenTwoOne) {
  const Corpus c = small_corpus(10);
  const Split s = split_trial_disjoint(c, {0.7, 0.2, 0.1}, 3);
  EXPECT_EQ(s.train_trials.size(), 7u);
  EXPECT_EQ(s.test_trials.size(), 2u);
  EXPECT_EQ(s.validation_trials.size(), 1u);
}

TEST(SplitTest, PartitionsAreTrialDisjointAndComplete) {
  const Corpus c = small_corpus(23);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Split s = split_trial_disjoint(c, {0.7, 0.2, 0.1}, seed);
    std::set<std::string> tr(s.train_trials.begin(), s.train_trials.end());
    std::set<std::string> te(s.test_trials.begin(), s.test_trials.end());
    std::set<std::string> va(s.validation_trials.begin(), s.validation_trials.end());
    for (const auto& id : te) EXPECT_FALSE(tr.count(id));
    for (const auto& id : va) EXPECT_FALSE(tr.count(id) || te.count(id));
    EXPECT_EQ(tr.size() + te.size() + va.size(), c.trials.size());
    EXPECT_LE(std::abs(static_cast<double>(tr.size()) - 0.7 * 23), 1.0);
    EXPECT_LE(std::abs(static_cast<double>(te.size()) - 0.2 * 23), 1.0);
    EXPECT_LE(std::abs(static_cast<double>(va.size()) - 0.1 * 23), 1.0);
    EXPECT_EQ(s.train.size() + s.test.size() + s.validation.size(), c.samples.size());
    for (auto i : s.train) EXPECT_TRUE(tr.count(c.samples[i].trial_id));
    for (auto i : s.test) EXPECT_TRUE(te.count(c.samples[i].trial_id));
    for (auto i : s.validation) EXPECT_TRUE(va.count(c.samples[i].trial_id));
  }
}

TEST(SplitTest, DeterministicInSeed) {
  const Corpus c = small_corpus(15);
  const Split a = split_trial_disjoint(c, {0.7, 0.2, 0.1}, 9);
  const Split b = split_trial_disjoint(c, {0.7, 0.2, 0.1}, 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.validation, b.validation);
  const Split d = split_trial_disjoint(c, {0.7, 0.2, 0.1}, 10);
  EXPECT_NE(a.train_trials, d.train_trials);
}

TEST(SplitTest, TooFewTrialsRejected) {
  const Corpus c = small_corpus(9);
  EXPECT_THROW(split_trial_disjoint(c, {0.7, 0.2, 0.1}, 1), ValidationError);
}

TEST(CorpusIoTest, SaveLoadSaveIsByteIdentical) {
  const Corpus c = small_corpus();
  const std::string first = corpus_to_string(c);
  std::istringstream is(first);
  const Corpus back = read_corpus(is);
  EXPECT_EQ(corpus_to_string(back), first);
  EXPECT_EQ(back.vocab.codes(CodeSpace::kMedication), c.vocab.codes(CodeSpace::kMedication));
  EXPECT_EQ(back.doctors.size(), c.doctors.size());
  EXPECT_EQ(back.samples.size(), c.samples.size());
}

TEST(CorpusIoTest, TruncatedFileIsRejected) {
  const std::string text = corpus_to_string(small_corpus());
  const std::string cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  std::istringstream is(cut);
  EXPECT_THROW(read_corpus(is), FormatError);
}

TEST(CorpusIoTest, MalformedLineReportsLineNumber) {
  std::string text = corpus_to_string(small_corpus());
  const auto second = text.find('\n') + 1;
  text.insert(second, "{not json\n");
  std::istringstream is(text);
  try {
    read_corpus(is);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(CorpusValidationTest, RejectsEmptyVisitAndUnsortedCodes) {
  Corpus c = small_corpus();
  Corpus bad = c;
  auto& v = bad.doctors[0].patients[0].visits[0];
  v.diagnosis.clear();
  v.procedure.clear();
  v.medication.clear();
  EXPECT_THROW(bad.validate(), ValidationError);

  bad = c;
  auto& w = bad.doctors[0].patients[0].visits[0];
  w.diagnosis = {3, 1};
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(CorpusValidationTest, RejectsNonIncreasingVisitTimes) {
  Corpus c = small_corpus();
  for (auto& d : c.doctors)
    for (auto& p : d.patients)
      if (p.visits.size() >= 2) {
        p.visits[1].time_index = p.visits[0].time_index;
        EXPECT_THROW(c.validate(), ValidationError);
        return;
      }
  FAIL() << "no multi-visit patient";
}

TEST(CorpusValidationTest, DanglingSampleIdRejected) {
  Corpus c = small_corpus();
  c.samples[0].doctor_id = "nobody";
  EXPECT_THROW(c.reindex(), ValidationError);
}

TEST(VocabularyTest, OffsetsFollowDxPxRxOrder) {
  CodeVocabulary v({"d0", "d1"}, {"p0"}, {"m0", "m1", "m2"});
  EXPECT_EQ(v.offset(CodeSpace::kDiagnosis), 0u);
  EXPECT_EQ(v.offset(CodeSpace::kProcedure), 2u);
  EXPECT_EQ(v.offset(CodeSpace::kMedication), 3u);
  Visit visit;
  visit.diagnosis = {1};
  visit.procedure = {0};
  visit.medication = {0, 2};
  EXPECT_EQ(visit.concatenated(v), (std::vector<std::uint32_t>{1, 2, 3, 5}));
  EXPECT_EQ(v.index(CodeSpace::kMedication, "m2"), 2u);
  EXPECT_FALSE(v.index(CodeSpace::kMedication, "d0").has_value());
}

}  // namespace
}  // namespace d2v::data
