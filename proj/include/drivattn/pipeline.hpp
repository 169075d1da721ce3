#pragma once

// label -> epoch -> (features) -> balance -> split/folds -> train -> evaluate -> report

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "drivattn/atdr.hpp"
#include "drivattn/datm.hpp"
#include "drivattn/eegnet.hpp"
#include "drivattn/evalstats.hpp"
#include "drivattn/features.hpp"
#include "drivattn/recdata.hpp"
#include "drivattn/report.hpp"
#include "drivattn/run_config.hpp"
#include "drivattn/search.hpp"
#include "drivattn/svm.hpp"

namespace drivattn {

inline constexpr const char* kToolVersion = "1.0.0";

enum class Protocol : std::uint8_t { Mixed, Loso };

inline std::string_view to_string(Protocol p) { return p == Protocol::Mixed ? "mixed" : "loso"; }

inline Protocol parse_protocol(std::string_view s) {
  if (s == "mixed") return Protocol::Mixed;
  if (s == "loso" || s == "inter") return Protocol::Loso;
  fail(ErrorKind::ConfigInvalid, "unknown protocol '" + std::string(s) + "'");
}

struct PipelineRequest {
  ModelKind model = ModelKind::Svm;
  Protocol protocol = Protocol::Mixed;
  Session session = Session::KPlus;
};

struct PipelineSeeds {
  std::uint64_t master = 0;
  std::uint64_t balance = 0;
  std::uint64_t split = 0;
  std::uint64_t model = 0;
  std::uint64_t loso = 0;
  std::uint64_t search = 0;

  static PipelineSeeds from(std::uint64_t master) {
    return {master, derive_seed(master, 1), derive_seed(master, 2), derive_seed(master, 3), derive_seed(master, 4),
            derive_seed(master, 5)};
  }

  std::vector<std::pair<std::string, std::uint64_t>> named() const {
    return {{"master", master}, {"balance", balance}, {"split", split},
            {"model", model},   {"loso", loso},       {"search", search}};
  }
};

struct SavedModel {
  std::string name;  // file stem, e.g. "model" or "fold03_s4"
  std::vector<unsigned char> bytes;
};

struct PipelineResult {
  EvalReport report;
  std::vector<SavedModel> models;
  LabelCounts counts;
  std::size_t n_items = 0;  // labeled epochs entering the protocol
  nlohmann::json manifest;
};

namespace detail {

inline MatrixD feature_matrix(const std::vector<FeatureVector>& rows) {
  require(!rows.empty(), ErrorKind::EmptyDataset, "no feature rows");
  MatrixD X(rows.size(), rows.front().values.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].values.size() == X.cols(), ErrorKind::ShapeMismatch, "feature rows differ in length");
    std::copy(rows[i].values.begin(), rows[i].values.end(), X.row(i).begin());
  }
  return X;
}

inline std::vector<int> svm_labels(const std::vector<FeatureVector>& rows) {
  std::vector<int> y;
  for (const auto& r : rows) y.push_back(to_binary(r.label) ? 1 : -1);
  return y;
}

struct Trained {
  std::vector<int> predictions;  // 1 = inattentive
  std::vector<unsigned char> datm;
};

inline nlohmann::json provenance(const RunConfig& cfg, const PipelineRequest& req, std::uint64_t seed) {
  return {{"config_hash", hex64(config_hash(cfg))},
          {"model", std::string(to_string(req.model))},
          {"protocol", std::string(to_string(req.protocol))},
          {"session", std::string(to_string(req.session))},
          {"seed", seed},
          {"version", kToolVersion}};
}

inline Trained train_svm(const RunConfig& cfg, const PipelineRequest& req, const std::vector<FeatureVector>& tr,
                         const std::vector<FeatureVector>& te, std::uint64_t seed) {
  const auto model = svm_train(feature_matrix(tr), svm_labels(tr), cfg.svm, seed);
  Trained out;
  if (!te.empty())
    for (int v : svm_predict(model, feature_matrix(te)).labels) out.predictions.push_back(v > 0 ? 1 : 0);
  out.datm = encode_svm(model, provenance(cfg, req, seed));
  return out;
}

inline Trained train_network(const RunConfig& cfg, const PipelineRequest& req, EEGNetConfig net,
                             const EEGDataset& tr, const EEGDataset& te, std::uint64_t seed) {
  net.n_channels = tr.channels;
  net.n_timepoints = tr.timepoints;
  if (cfg.search.budget > 0 && !cfg.search.space.empty())
    net = random_search(cfg.search.space, net, tr, cfg.search.folds, cfg.search.budget, derive_seed(seed, 11)).best;
  validate(net);
  auto model = make_eegnet(net, derive_seed(seed, 12));
  train(model, tr, nullptr, derive_seed(seed, 13));
  Trained out;
  if (te.size() > 0) out.predictions = predict_labels(model, te);
  out.datm = encode_eegnet(model, req.model, provenance(cfg, req, seed));
  return out;
}

}  // namespace detail

inline std::vector<Recording> filter_session(const std::vector<Recording>& recordings, Session session) {
  std::vector<Recording> out;
  for (const auto& r : recordings)
    if (r.session == session) out.push_back(r);
  return out;
}

inline double common_sample_rate(const std::vector<Recording>& recordings) {
  require(!recordings.empty(), ErrorKind::EmptyDataset, "no recordings for the requested session");
  const double fs = recordings.front().sample_rate_hz;
  for (const auto& r : recordings)
    require(r.sample_rate_hz == fs, ErrorKind::ShapeMismatch, "recordings disagree on sample rate");
  return fs;
}

inline nlohmann::json pipeline_manifest(const RunConfig& cfg, const PipelineRequest& req, const PipelineSeeds& seeds) {
  nlohmann::json m;
  m["tool"] = "drivattn";
  m["version"] = kToolVersion;
  m["formats"] = {{"atdr", kAtdrVersion}, {"datm", kDatmVersion}};
  m["config_hash"] = hex64(config_hash(cfg));
  m["config"] = nlohmann::json::object();
  for (const auto& [k, v] : config_entries(cfg)) m["config"][k] = v;
  m["request"] = {{"model", std::string(to_string(req.model))},
                  {"protocol", std::string(to_string(req.protocol))},
                  {"session", std::string(to_string(req.session))}};
  nlohmann::json s = nlohmann::json::object();
  for (const auto& [k, v] : seeds.named()) s[k] = v;
  m["seeds"] = s;
  return m;
}

// Runs one (model, protocol, session) cell on the given recordings.
inline PipelineResult run_pipeline(const RunConfig& cfg, const PipelineRequest& req,
                                   const std::vector<Recording>& recordings) {
  validate(cfg);
  const auto seeds = PipelineSeeds::from(cfg.seed);
  const auto selected = filter_session(recordings, req.session);
  const double fs = common_sample_rate(selected);
  auto labeled = build_labeled_set(selected, cfg.label);
  require(labeled.counts.attentive > 0 && labeled.counts.inattentive > 0, ErrorKind::SingleClassInput,
          "a class is empty after labeling (attentive=" + std::to_string(labeled.counts.attentive) +
              ", inattentive=" + std::to_string(labeled.counts.inattentive) + ")");

  PipelineResult res;
  res.counts = labeled.counts;
  res.n_items = labeled.epochs.size();
  res.report.seeds = seeds.named();
  res.manifest = pipeline_manifest(cfg, req, seeds);
  const CellKey key{std::string(model_family(to_string(req.model))), std::string(model_input(to_string(req.model))),
                    req.session, std::string(to_string(req.protocol))};
  const std::size_t n_channels = labeled.epochs.front().data.rows();

  // Features are per-epoch, so they can be computed before balancing.
  std::vector<FeatureVector> features;
  if (req.model != ModelKind::EEGNetRaw) {
    features = extract_features(labeled.epochs, fs, cfg.bands);
    labeled.epochs.clear();
  }

  auto trainer_for = [&](auto tag) {
    using Item = typename decltype(tag)::type;
    return [&, req](const std::vector<Item>& tr, const std::vector<Item>& te, std::uint64_t seed) -> detail::Trained {
      if constexpr (std::is_same_v<Item, FeatureVector>) {
        if (req.model == ModelKind::Svm) return detail::train_svm(cfg, req, tr, te, seed);
        return detail::train_network(cfg, req, cfg.bands_net, spectral_input_adapter(tr, n_channels, cfg.bands.size()),
                                     spectral_input_adapter(te, n_channels, cfg.bands.size()), seed);
      } else {
        EEGDataset te_ds{tr.front().data.rows(), tr.front().data.cols(), {}, {}};
        if (!te.empty()) te_ds = raw_dataset(te);
        return detail::train_network(cfg, req, cfg.eegnet, raw_dataset(tr), te_ds, seed);
      }
    };
  };

  auto run = [&](const auto& items, auto tag) {
    using Item = typename decltype(tag)::type;
    auto trainer = trainer_for(tag);
    if (req.protocol == Protocol::Mixed) {
      const auto balanced = balance_classes(items, seeds.balance);
      const auto plan = split_mixed(balanced, cfg.train_frac, seeds.split);
      const auto tr = gather(balanced, std::span<const std::size_t>(plan.train));
      const auto te = gather(balanced, std::span<const std::size_t>(plan.test));
      require(!te.empty(), ErrorKind::EmptyDataset, "mixed split left the test set empty");
      auto trained = trainer(tr, te, seeds.model);
      std::vector<int> truth;
      for (const auto& it : te) truth.push_back(to_binary(it.label));
      add_mixed(res.report, key, accuracy(trained.predictions, truth));
      res.models.push_back({"model", std::move(trained.datm)});
    } else {
      std::size_t fold = 0;
      auto fold_trainer = [&](const std::vector<Item>& tr, const std::vector<Item>& te, std::uint64_t seed) {
        auto trained = trainer(tr, te, seed);
        char name[48];
        std::snprintf(name, sizeof name, "fold%02zu_s%u", fold++, static_cast<unsigned>(te.front().subject_id));
        res.models.push_back({name, std::move(trained.datm)});
        return trained.predictions;
      };
      add_loso(res.report, key, run_loso(items, fold_trainer, seeds.loso));
    }
  };

  if (req.model == ModelKind::EEGNetRaw)
    run(labeled.epochs, std::type_identity<LabeledEpoch>{});
  else
    run(features, std::type_identity<FeatureVector>{});
  return res;
}

}  // namespace drivattn
