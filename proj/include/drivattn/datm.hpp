#pragma once

// DATM model container (little-endian):
//   "DATM" | u16 version=1 | u8 kind (0=svm, 1=eegnet-raw, 2=eegnet-bands)
//   | u32 metadata length + UTF-8 JSON | f64 parameter arrays
//
// EEGNet arrays follow kParamNames order, then the three batch-norm running
// mean/variance pairs. SVM arrays: support vectors (row-major), dual
// coefficients, bias.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "drivattn/binary_io.hpp"
#include "drivattn/eegnet.hpp"
#include "drivattn/svm.hpp"

namespace drivattn {

enum class ModelKind : std::uint8_t { Svm = 0, EEGNetRaw = 1, EEGNetBands = 2 };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Svm: return "svm";
    case ModelKind::EEGNetRaw: return "eegnet-raw";
    case ModelKind::EEGNetBands: return "eegnet-bands";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "svm") return ModelKind::Svm;
  if (s == "eegnet-raw") return ModelKind::EEGNetRaw;
  if (s == "eegnet-bands") return ModelKind::EEGNetBands;
  fail(ErrorKind::ConfigInvalid, "unknown model kind '" + std::string(s) + "'");
}

inline constexpr char kDatmMagic[4] = {'D', 'A', 'T', 'M'};
inline constexpr std::uint16_t kDatmVersion = 1;

inline nlohmann::json to_json(const EEGNetConfig& c) {
  return {{"n_channels", c.n_channels},   {"n_timepoints", c.n_timepoints},
          {"temporal_kernels", c.temporal_kernels}, {"temporal_len", c.temporal_len},
          {"depth_multiplier", c.depth_multiplier}, {"sep_kernels", c.sep_kernels},
          {"sep_len", c.sep_len},         {"pool1", c.pool1},
          {"pool2", c.pool2},             {"dropout", c.dropout},
          {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},           {"elu_alpha", c.elu_alpha},
          {"bn_epsilon", c.bn_epsilon},   {"bn_momentum", c.bn_momentum},
          {"depthwise_max_norm", c.depthwise_max_norm}, {"dense_max_norm", c.dense_max_norm}};
}

inline EEGNetConfig eegnet_config_from_json(const nlohmann::json& j) {
  EEGNetConfig c;
  try {
    c.n_channels = j.at("n_channels");
    c.n_timepoints = j.at("n_timepoints");
    c.temporal_kernels = j.at("temporal_kernels");
    c.temporal_len = j.at("temporal_len");
    c.depth_multiplier = j.at("depth_multiplier");
    c.sep_kernels = j.at("sep_kernels");
    c.sep_len = j.at("sep_len");
    c.pool1 = j.at("pool1");
    c.pool2 = j.at("pool2");
    c.dropout = j.at("dropout");
    c.learning_rate = j.at("learning_rate");
    c.batch_size = j.at("batch_size");
    c.epochs = j.at("epochs");
    c.elu_alpha = j.at("elu_alpha");
    c.bn_epsilon = j.at("bn_epsilon");
    c.bn_momentum = j.at("bn_momentum");
    c.depthwise_max_norm = j.at("depthwise_max_norm");
    c.dense_max_norm = j.at("dense_max_norm");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("bad network metadata: ") + e.what());
  }
  validate(c);
  return c;
}

namespace detail {

inline std::vector<unsigned char> datm_frame(ModelKind kind, const nlohmann::json& meta,
                                             const std::vector<double>& blob) {
  ByteWriter w;
  w.put_bytes(kDatmMagic, 4);
  w.put<std::uint16_t>(kDatmVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(kind));
  const std::string text = meta.dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  w.put_string(text);
  w.put_bytes(blob.data(), blob.size() * sizeof(double));
  return w.bytes();
}

struct DatmFrame {
  ModelKind kind;
  nlohmann::json meta;
  std::vector<double> blob;
};

inline DatmFrame datm_unframe(std::vector<unsigned char> bytes) {
  ByteReader r(std::move(bytes));
  if (r.get_string(4) != std::string(kDatmMagic, 4)) fail(ErrorKind::Format, "bad DATM magic");
  const auto version = r.get<std::uint16_t>();
  require(version == kDatmVersion, ErrorKind::Format, "unsupported DATM version " + std::to_string(version));
  const auto kind = r.get<std::uint8_t>();
  require(kind <= 2, ErrorKind::Format, "unknown DATM model kind " + std::to_string(kind));
  const auto len = r.get<std::uint32_t>();
  DatmFrame f{static_cast<ModelKind>(kind), {}, {}};
  try {
    f.meta = nlohmann::json::parse(r.get_string(len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("bad DATM metadata: ") + e.what());
  }
  require(r.remaining() % sizeof(double) == 0, ErrorKind::Format, "DATM parameter blob is not a whole number of f64");
  f.blob.resize(r.remaining() / sizeof(double));
  r.get_array(f.blob.data(), f.blob.size());
  return f;
}

}  // namespace detail

inline std::vector<unsigned char> encode_eegnet(const EEGNetModel& model, ModelKind kind, nlohmann::json provenance = {}) {
  require(kind != ModelKind::Svm, ErrorKind::InvalidModel, "network models need an eegnet kind");
  nlohmann::json meta = {{"config", to_json(model.config)}, {"provenance", std::move(provenance)}};
  std::vector<double> blob;
  for (const auto& p : model.params) blob.insert(blob.end(), p.begin(), p.end());
  for (const auto& bn : model.bn) {
    blob.insert(blob.end(), bn.mean.begin(), bn.mean.end());
    blob.insert(blob.end(), bn.var.begin(), bn.var.end());
  }
  return detail::datm_frame(kind, meta, blob);
}

struct LoadedEEGNet {
  ModelKind kind;
  EEGNetModel model;
  nlohmann::json provenance;
};

inline LoadedEEGNet decode_eegnet(std::vector<unsigned char> bytes) {
  auto f = detail::datm_unframe(std::move(bytes));
  require(f.kind != ModelKind::Svm, ErrorKind::InvalidModel, "DATM file holds an SVM, not a network");
  require(f.meta.contains("config"), ErrorKind::Format, "DATM metadata lacks config");
  const auto cfg = eegnet_config_from_json(f.meta["config"]);
  auto model = make_eegnet(cfg, 0);
  const auto sizes = param_sizes(cfg);
  std::size_t expected = 0;
  for (auto s : sizes) expected += s;
  const std::array<std::size_t, 3> groups = {cfg.temporal_kernels, cfg.depthwise_maps(), cfg.sep_kernels};
  for (auto g : groups) expected += 2 * g;
  require(f.blob.size() == expected, ErrorKind::ShapeMismatch,
          "parameter blob holds " + std::to_string(f.blob.size()) + " values, config needs " + std::to_string(expected));
  auto it = f.blob.begin();
  auto take = [&](std::vector<double>& dst, std::size_t n) {
    dst.assign(it, it + static_cast<std::ptrdiff_t>(n));
    it += static_cast<std::ptrdiff_t>(n);
  };
  for (std::size_t p = 0; p < kParamCount; ++p) take(model.params[p], sizes[p]);
  for (std::size_t i = 0; i < 3; ++i) {
    take(model.bn[i].mean, groups[i]);
    take(model.bn[i].var, groups[i]);
  }
  return {f.kind, std::move(model), f.meta.value("provenance", nlohmann::json{})};
}

inline std::vector<unsigned char> encode_svm(const SvmModel& m, nlohmann::json provenance = {}) {
  validate(m);
  std::vector<bool> zv = m.scaler.zero_variance;
  nlohmann::json meta = {{"kernel", m.kernel == KernelType::Rbf ? "rbf" : "linear"},
                         {"C", m.C},
                         {"gamma", m.gamma},
                         {"n_support", m.support_vectors.rows()},
                         {"n_features", m.n_features()},
                         {"standardize", m.standardize},
                         {"standardizer", {{"mean", m.scaler.mean}, {"std", m.scaler.stddev}, {"zero_variance", zv}}},
                         {"provenance", std::move(provenance)}};
  std::vector<double> blob = m.support_vectors.data();
  blob.insert(blob.end(), m.dual_coef.begin(), m.dual_coef.end());
  blob.push_back(m.bias);
  return detail::datm_frame(ModelKind::Svm, meta, blob);
}

inline SvmModel decode_svm(std::vector<unsigned char> bytes) {
  auto f = detail::datm_unframe(std::move(bytes));
  require(f.kind == ModelKind::Svm, ErrorKind::InvalidModel, "DATM file holds a network, not an SVM");
  SvmModel m;
  std::size_t n_sv = 0, n_feat = 0;
  try {
    const std::string kernel = f.meta.at("kernel");
    require(kernel == "rbf" || kernel == "linear", ErrorKind::Format, "unknown kernel " + kernel);
    m.kernel = kernel == "rbf" ? KernelType::Rbf : KernelType::Linear;
    m.C = f.meta.at("C");
    m.gamma = f.meta.at("gamma");
    n_sv = f.meta.at("n_support");
    n_feat = f.meta.at("n_features");
    m.standardize = f.meta.at("standardize");
    const auto& s = f.meta.at("standardizer");
    m.scaler.mean = s.at("mean").get<std::vector<double>>();
    m.scaler.stddev = s.at("std").get<std::vector<double>>();
    m.scaler.zero_variance = s.at("zero_variance").get<std::vector<bool>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("bad SVM metadata: ") + e.what());
  }
  require(n_sv > 0, ErrorKind::InvalidModel, "SVM model has no support vectors");
  require(f.blob.size() == n_sv * n_feat + n_sv + 1, ErrorKind::ShapeMismatch, "SVM parameter blob has the wrong size");
  m.support_vectors = MatrixD(n_sv, n_feat, std::vector<double>(f.blob.begin(), f.blob.begin() + static_cast<std::ptrdiff_t>(n_sv * n_feat)));
  m.dual_coef.assign(f.blob.begin() + static_cast<std::ptrdiff_t>(n_sv * n_feat), f.blob.end() - 1);
  m.bias = f.blob.back();
  validate(m);
  return m;
}

inline ModelKind peek_model_kind(const std::filesystem::path& path) {
  return detail::datm_unframe(read_file_bytes(path)).kind;
}

}  // namespace drivattn
