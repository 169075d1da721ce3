#include <gtest/gtest.h>

#include <set>

#include "drivattn/evalstats.hpp"

using namespace drivattn;

namespace {

struct Item {
  std::uint16_t subject_id = 0;
  TrialLabel label = TrialLabel::Attentive;
  double x = 0.0;
  std::size_t id = 0;
};

std::vector<Item> balanced(std::size_t per_class) {
  std::vector<Item> v;
  for (std::size_t i = 0; i < 2 * per_class; ++i)
    v.push_back({static_cast<std::uint16_t>(i % 5), i % 2 ? TrialLabel::Inattentive : TrialLabel::Attentive, 0.0, i});
  return v;
}

// Subjects with an informative scalar: inattentive trials sit above zero.
std::vector<Item> subjects(std::size_t n_subjects, std::size_t per_subject, std::uint64_t seed, double sep = 2.0) {
  Rng rng(seed);
  std::vector<Item> v;
  for (std::uint16_t s = 1; s <= n_subjects; ++s)
    for (std::size_t t = 0; t < per_subject; ++t) {
      const bool inatt = rng.bernoulli(0.4);
      v.push_back({s, inatt ? TrialLabel::Inattentive : TrialLabel::Attentive,
                   rng.normal(inatt ? sep : -sep, 1.0), v.size()});
    }
  return v;
}

std::vector<int> threshold_trainer(const std::vector<Item>&, const std::vector<Item>& te, std::uint64_t) {
  std::vector<int> out;
  for (const auto& it : te) out.push_back(it.x > 0 ? 1 : 0);
  return out;
}

std::size_t count_label(const std::vector<Item>& v, const std::vector<std::size_t>& idx, TrialLabel l) {
  std::size_t c = 0;
  for (auto i : idx) c += v[i].label == l;
  return c;
}

}  // namespace

TEST(Accuracy, Examples) {
  EXPECT_EQ(accuracy({1, 0, 1}, {1, 0, 1}), 1.0);
  EXPECT_EQ(accuracy({1, 0}, {0, 1}), 0.0);
  EXPECT_EQ(accuracy({1, 1, 0, 0}, {1, 1, 0, 1}), 0.75);
  EXPECT_THROW(accuracy({}, {}), Error);
  EXPECT_THROW(accuracy({1}, {1, 0}), Error);
}

TEST(SplitMixed, StudyScaleArithmetic) {
  const auto v = balanced(769);
  const auto p = split_mixed(v, 0.9, 3);
  EXPECT_EQ(p.train.size(), 1384u);
  EXPECT_EQ(p.test.size(), 154u);
  EXPECT_EQ(count_label(v, p.test, TrialLabel::Attentive), 77u);
}

TEST(SplitMixed, TwentyEpochs) {
  const auto v = balanced(10);
  const auto p = split_mixed(v, 0.9, 1);
  EXPECT_EQ(p.train.size(), 18u);
  EXPECT_EQ(count_label(v, p.train, TrialLabel::Attentive), 9u);
  EXPECT_EQ(count_label(v, p.test, TrialLabel::Attentive), 1u);
  EXPECT_EQ(count_label(v, p.test, TrialLabel::Inattentive), 1u);
}

TEST(SplitMixed, DeterministicAndDisjointOverSeeds) {
  const auto v = balanced(37);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto p = split_mixed(v, 0.9, seed);
    ASSERT_EQ(p, split_mixed(v, 0.9, seed));
    std::set<std::size_t> all(p.train.begin(), p.train.end());
    for (auto i : p.test) ASSERT_TRUE(all.insert(i).second) << "seed " << seed;
    ASSERT_EQ(all.size(), v.size());
    ASSERT_EQ(p.train.size(), 67u);
  }
  EXPECT_NE(split_mixed(v, 0.9, 1).test, split_mixed(v, 0.9, 2).test);
}

TEST(SplitMixed, Errors) {
  EXPECT_THROW(split_mixed(std::vector<Item>{}, 0.9, 1), Error);
  EXPECT_THROW(split_mixed(balanced(3), 1.0, 1), Error);
}

TEST(Loso, OneFoldPerSubjectWithoutLeakage) {
  const auto v = subjects(14, 20, 1);
  const auto plans = loso_plans(v, 7);
  ASSERT_EQ(plans.size(), 14u);
  std::set<std::uint16_t> held;
  for (const auto& p : plans) {
    held.insert(p.held_out_subject);
    for (auto i : p.test) EXPECT_EQ(v[i].subject_id, p.held_out_subject);
    for (auto i : p.train) EXPECT_NE(v[i].subject_id, p.held_out_subject);
    EXPECT_EQ(p.train.size() + p.test.size(), v.size());
  }
  EXPECT_EQ(held.size(), 14u);
}

TEST(Loso, TrainingPortionIsBalancedAndMeanIsAverage) {
  const auto v = subjects(6, 25, 2);
  std::vector<std::uint16_t> seen_test;
  auto trainer = [&](const std::vector<Item>& tr, const std::vector<Item>& te, std::uint64_t s) {
    std::size_t att = 0;
    for (const auto& it : tr) {
      att += it.label == TrialLabel::Attentive;
      EXPECT_NE(it.subject_id, te.front().subject_id);
    }
    EXPECT_EQ(2 * att, tr.size());
    seen_test.push_back(te.front().subject_id);
    return threshold_trainer(tr, te, s);
  };
  const auto res = run_loso(v, trainer, 3);
  ASSERT_EQ(res.folds.size(), 6u);
  double mean = 0.0;
  for (const auto& f : res.folds) mean += f.accuracy;
  EXPECT_NEAR(res.mean, mean / 6.0, 1e-12);
  EXPECT_EQ(seen_test, (std::vector<std::uint16_t>{1, 2, 3, 4, 5, 6}));
}

TEST(Loso, SeparableSubjectsScoreHigh) {
  const auto v = subjects(2, 60, 4, 3.0);
  const auto res = run_loso(v, threshold_trainer, 1);
  ASSERT_EQ(res.folds.size(), 2u);
  for (const auto& f : res.folds) EXPECT_GE(f.accuracy, 0.9);
}

TEST(Loso, SingleSubjectRejected) {
  try {
    run_loso(subjects(1, 10, 1), threshold_trainer, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewSubjects);
  }
}
