#pragma once

#include <string>
#include <utility>
#include <vector>

#include "drivattn/eegnet.hpp"

namespace drivattn {

// Candidate values per named hyperparameter.
using SearchSpace = std::vector<std::pair<std::string, std::vector<double>>>;

inline void set_hyperparameter(EEGNetConfig& cfg, const std::string& name, double v) {
  auto as_size = [&](std::size_t& field) {
    require(v >= 0.0 && v == static_cast<double>(static_cast<std::size_t>(v)), ErrorKind::ConfigInvalid,
            name + " needs a non-negative integer");
    field = static_cast<std::size_t>(v);
  };
  if (name == "temporal_kernels") as_size(cfg.temporal_kernels);
  else if (name == "temporal_len") as_size(cfg.temporal_len);
  else if (name == "depth_multiplier") as_size(cfg.depth_multiplier);
  else if (name == "sep_kernels") as_size(cfg.sep_kernels);
  else if (name == "sep_len") as_size(cfg.sep_len);
  else if (name == "pool1") as_size(cfg.pool1);
  else if (name == "pool2") as_size(cfg.pool2);
  else if (name == "batch_size") as_size(cfg.batch_size);
  else if (name == "epochs") as_size(cfg.epochs);
  else if (name == "dropout") cfg.dropout = v;
  else if (name == "learning_rate") cfg.learning_rate = v;
  else fail(ErrorKind::ConfigInvalid, "unknown hyperparameter '" + name + "'");
}

struct SearchResult {
  EEGNetConfig best;
  std::size_t best_index = 0;
  std::vector<EEGNetConfig> candidates;
  std::vector<double> scores;  // mean k-fold accuracy per candidate
};

// Mean validation accuracy over `folds` contiguous folds of a seeded permutation.
inline double cross_validate(const EEGNetConfig& cfg, const EEGDataset& data, std::size_t folds, std::uint64_t seed) {
  require(folds >= 2 && data.size() >= folds, ErrorKind::EmptyDataset, "not enough samples for the fold count");
  auto order = iota_indices(data.size());
  Rng(seed).shuffle(order);
  double total = 0.0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t lo = f * data.size() / folds, hi = (f + 1) * data.size() / folds;
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < order.size(); ++i) (i >= lo && i < hi ? va : tr).push_back(order[i]);
    auto model = make_eegnet(cfg, derive_seed(seed, 100 + f));
    const auto train_part = data.subset(tr);
    const auto val_part = data.subset(va);
    train(model, train_part, nullptr, derive_seed(seed, 200 + f));
    const auto pred = predict_labels(model, val_part);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == val_part.y[i];
    total += static_cast<double>(correct) / static_cast<double>(pred.size());
  }
  return total / static_cast<double>(folds);
}

// Samples `budget` configurations uniformly from `space`, scores each by
// k-fold CV on `data`, and returns the best (earliest sample wins ties).
inline SearchResult random_search(const SearchSpace& space, const EEGNetConfig& base, const EEGDataset& data,
                                  std::size_t folds, std::size_t budget, std::uint64_t seed) {
  require(budget >= 1, ErrorKind::ConfigInvalid, "search budget must be at least 1");
  require(folds >= 2, ErrorKind::ConfigInvalid, "search needs at least 2 folds");
  for (const auto& [name, values] : space)
    require(!values.empty(), ErrorKind::EmptySpace, "hyperparameter '" + name + "' has no candidates");
  SearchResult res;
  Rng rng(seed);
  for (std::size_t i = 0; i < budget; ++i) {
    EEGNetConfig cfg = base;
    for (const auto& [name, values] : space) set_hyperparameter(cfg, name, values[rng.index(values.size())]);
    validate(cfg);
    res.candidates.push_back(cfg);
  }
  for (std::size_t i = 0; i < budget; ++i) {
    const double score = cross_validate(res.candidates[i], data, folds, derive_seed(seed, 7919 + i));
    res.scores.push_back(score);
    if (i == 0 || score > res.scores[res.best_index]) res.best_index = i;
  }
  res.best = res.candidates[res.best_index];
  return res;
}

}  // namespace drivattn
