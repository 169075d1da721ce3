#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "drivattn/error.hpp"
#include "drivattn/random.hpp"
#include "drivattn/recdata.hpp"

namespace drivattn {

template <class A, class B>
double accuracy(std::span<const A> predictions, std::span<const B> labels) {
  require(!predictions.empty(), ErrorKind::EmptyInput, "accuracy of an empty prediction set");
  require(predictions.size() == labels.size(), ErrorKind::LengthMismatch, "predictions and labels differ in length");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  return accuracy(std::span<const int>(predictions), std::span<const int>(labels));
}

enum class SplitStrategy : std::uint8_t { MixedSubject, LeaveOneSubjectOut };

struct SplitPlan {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
  SplitStrategy strategy = SplitStrategy::MixedSubject;
  double train_frac = 0.9;
  std::uint16_t held_out_subject = 0;

  bool operator==(const SplitPlan&) const = default;
};

// Class-stratified shuffle split: round(n * train_frac) training items, with
// each class contributing in proportion.
template <class Item>
SplitPlan split_mixed(const std::vector<Item>& items, double train_frac, std::uint64_t seed) {
  require(!items.empty(), ErrorKind::EmptyDataset, "cannot split an empty dataset");
  require(train_frac > 0.0 && train_frac < 1.0, ErrorKind::ConfigInvalid, "train fraction must lie in (0,1)");
  std::vector<std::size_t> att, inatt;
  for (std::size_t i = 0; i < items.size(); ++i) (items[i].label == TrialLabel::Attentive ? att : inatt).push_back(i);
  Rng rng(seed);
  rng.shuffle(att);
  rng.shuffle(inatt);
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(items.size()) * train_frac));
  std::size_t n_att = std::min(att.size(), static_cast<std::size_t>(std::llround(static_cast<double>(att.size()) * train_frac)));
  std::size_t n_inatt = std::min(inatt.size(), n_train - std::min(n_train, n_att));
  n_att = std::min(att.size(), n_train - n_inatt);

  SplitPlan plan;
  plan.seed = seed;
  plan.train_frac = train_frac;
  plan.strategy = SplitStrategy::MixedSubject;
  plan.train.insert(plan.train.end(), att.begin(), att.begin() + static_cast<std::ptrdiff_t>(n_att));
  plan.train.insert(plan.train.end(), inatt.begin(), inatt.begin() + static_cast<std::ptrdiff_t>(n_inatt));
  plan.test.insert(plan.test.end(), att.begin() + static_cast<std::ptrdiff_t>(n_att), att.end());
  plan.test.insert(plan.test.end(), inatt.begin() + static_cast<std::ptrdiff_t>(n_inatt), inatt.end());
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.test.begin(), plan.test.end());
  return plan;
}

template <class Item>
std::vector<Item> gather(const std::vector<Item>& items, std::span<const std::size_t> idx) {
  std::vector<Item> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

struct FoldResult {
  std::uint16_t subject = 0;
  double accuracy = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

struct LosoResult {
  std::vector<FoldResult> folds;
  double mean = 0.0;
};

template <class Item>
std::vector<SplitPlan> loso_plans(const std::vector<Item>& items, std::uint64_t seed) {
  std::map<std::uint16_t, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < items.size(); ++i) by_subject[items[i].subject_id].push_back(i);
  require(by_subject.size() >= 2, ErrorKind::TooFewSubjects,
          "leave-one-subject-out needs at least 2 subjects, got " + std::to_string(by_subject.size()));
  std::vector<SplitPlan> plans;
  for (const auto& [subject, idx] : by_subject) {
    SplitPlan p;
    p.strategy = SplitStrategy::LeaveOneSubjectOut;
    p.held_out_subject = subject;
    p.seed = derive_seed(seed, subject);
    p.test = idx;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (items[i].subject_id != subject) p.train.push_back(i);
    plans.push_back(std::move(p));
  }
  return plans;
}

// `trainer(train_items, test_items, fold_seed)` returns binary predictions for
// the test items (1 = inattentive). The training portion of every fold is
// class-balanced before it reaches the trainer; the held-out subject is not.
template <class Item, class Trainer>
LosoResult run_loso(const std::vector<Item>& items, Trainer&& trainer, std::uint64_t seed) {
  LosoResult res;
  for (const auto& plan : loso_plans(items, seed)) {
    const auto train_items = balance_classes(gather(items, std::span<const std::size_t>(plan.train)), plan.seed);
    const auto test_items = gather(items, std::span<const std::size_t>(plan.test));
    for (const auto& it : train_items)
      require(it.subject_id != plan.held_out_subject, ErrorKind::ShapeMismatch, "held-out subject leaked into training");
    const std::vector<int> pred = trainer(train_items, test_items, derive_seed(plan.seed, 1));
    std::vector<int> truth;
    for (const auto& it : test_items) truth.push_back(to_binary(it.label));
    res.folds.push_back({plan.held_out_subject, accuracy(pred, truth), train_items.size(), test_items.size()});
  }
  double s = 0.0;
  for (const auto& f : res.folds) s += f.accuracy;
  res.mean = s / static_cast<double>(res.folds.size());
  return res;
}

}  // namespace drivattn
