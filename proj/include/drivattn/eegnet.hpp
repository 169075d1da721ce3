#pragma once

// Compact EEG convolutional network (temporal conv -> channel-spanning
// depthwise conv -> separable conv -> dense sigmoid) with hand-derived
// backpropagation, Adam and max-norm constraints.
//
// Internal layouts (all row-major, batch outermost):
//   input      [B][C][T]
//   block 1    [B][K1][C][T] -> depthwise [B][M][T], M = K1*D -> pool [B][M][T1]
//   block 2    separable [B][K2][T1] -> pool [B][K2][T2]
//   flatten    index k*T2 + t

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drivattn/error.hpp"
#include "drivattn/random.hpp"
#include "drivattn/tensor.hpp"

namespace drivattn {

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

struct EEGNetConfig {
  std::size_t n_channels = 30;
  std::size_t n_timepoints = 1501;
  std::size_t temporal_kernels = 32;
  std::size_t temporal_len = 128;
  std::size_t depth_multiplier = 4;
  std::size_t sep_kernels = 32;
  std::size_t sep_len = 16;
  std::size_t pool1 = 16;
  std::size_t pool2 = 8;
  double dropout = 0.5;
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 60;

  double elu_alpha = 1.0;
  double bn_epsilon = 1e-3;
  double bn_momentum = 0.99;
  double depthwise_max_norm = 1.0;
  double dense_max_norm = 0.25;

  std::size_t depthwise_maps() const { return temporal_kernels * depth_multiplier; }
  std::size_t pooled1() const { return ceil_div(n_timepoints, pool1); }
  std::size_t pooled2() const { return ceil_div(pooled1(), pool2); }
  std::size_t flat_size() const { return sep_kernels * pooled2(); }

  bool operator==(const EEGNetConfig&) const = default;
};

inline void validate(const EEGNetConfig& c) {
  const bool positive = c.n_channels && c.n_timepoints && c.temporal_kernels && c.temporal_len &&
                        c.depth_multiplier && c.sep_kernels && c.sep_len && c.pool1 && c.pool2 && c.batch_size;
  require(positive, ErrorKind::ConfigInvalid, "network sizes must be positive");
  require(c.dropout >= 0.0 && c.dropout < 1.0, ErrorKind::ConfigInvalid, "dropout must lie in [0,1)");
  require(c.learning_rate > 0.0, ErrorKind::ConfigInvalid, "learning rate must be positive");
  require(c.bn_epsilon > 0.0 && c.bn_momentum >= 0.0 && c.bn_momentum < 1.0, ErrorKind::ConfigInvalid,
          "invalid batch-norm settings");
  require(c.depthwise_max_norm > 0.0 && c.dense_max_norm > 0.0, ErrorKind::ConfigInvalid,
          "max-norm caps must be positive");
}

// Network for 5-band spectral images (C x 5): short kernels and pools so every
// stage keeps at least one column.
inline EEGNetConfig bands_network_config(EEGNetConfig base, std::size_t n_bands = 5) {
  base.n_timepoints = n_bands;
  base.temporal_len = 3;
  base.pool1 = 2;
  base.sep_len = 3;
  base.pool2 = 2;
  return base;
}

enum ParamId : std::size_t {
  kTemporalW,
  kBn1Gamma,
  kBn1Beta,
  kDepthW,
  kBn2Gamma,
  kBn2Beta,
  kSepDepthW,
  kSepPointW,
  kBn3Gamma,
  kBn3Beta,
  kDenseW,
  kDenseB,
  kParamCount
};

inline constexpr std::array<std::string_view, kParamCount> kParamNames = {
    "temporal_w", "bn1_gamma", "bn1_beta", "depthwise_w", "bn2_gamma",  "bn2_beta",
    "sep_depth_w", "sep_point_w", "bn3_gamma", "bn3_beta", "dense_w", "dense_b"};

using ParamSet = std::array<std::vector<double>, kParamCount>;

inline std::array<std::size_t, kParamCount> param_sizes(const EEGNetConfig& c) {
  const std::size_t m = c.depthwise_maps();
  return {c.temporal_kernels * c.temporal_len,
          c.temporal_kernels,
          c.temporal_kernels,
          m * c.n_channels,
          m,
          m,
          m * c.sep_len,
          c.sep_kernels * m,
          c.sep_kernels,
          c.sep_kernels,
          c.flat_size(),
          1};
}

struct BatchNormRunning {
  std::vector<double> mean;
  std::vector<double> var;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  ParamSet m;
  ParamSet v;
};

struct EEGNetModel {
  EEGNetConfig config;
  ParamSet params;
  std::array<BatchNormRunning, 3> bn;
  AdamState adam;
  bool training = false;
};

inline void apply_max_norm(EEGNetModel& model) {
  const auto& c = model.config;
  auto project = [](double* w, std::size_t n, double cap) {
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += w[i] * w[i];
    const double norm = std::sqrt(sq);
    if (norm > cap) {
      const double s = cap / norm;
      for (std::size_t i = 0; i < n; ++i) w[i] *= s;
    }
  };
  auto& dw = model.params[kDepthW];
  for (std::size_t m = 0; m < c.depthwise_maps(); ++m) project(dw.data() + m * c.n_channels, c.n_channels, c.depthwise_max_norm);
  project(model.params[kDenseW].data(), model.params[kDenseW].size(), c.dense_max_norm);
}

// Glorot-uniform weights, unit gains, zero biases; constrained weights start
// inside their max-norm balls.
inline EEGNetModel make_eegnet(const EEGNetConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  EEGNetModel model;
  model.config = cfg;
  const auto sizes = param_sizes(cfg);
  for (std::size_t p = 0; p < kParamCount; ++p) {
    model.params[p].assign(sizes[p], 0.0);
    model.adam.m[p].assign(sizes[p], 0.0);
    model.adam.v[p].assign(sizes[p], 0.0);
  }
  for (auto id : {kBn1Gamma, kBn2Gamma, kBn3Gamma}) std::fill(model.params[id].begin(), model.params[id].end(), 1.0);

  const double m = static_cast<double>(cfg.depthwise_maps());
  const double C = static_cast<double>(cfg.n_channels);
  auto fans = [&](ParamId id) -> std::pair<double, double> {
    switch (id) {
      case kTemporalW: return {double(cfg.temporal_len), double(cfg.temporal_len * cfg.temporal_kernels)};
      case kDepthW: return {C * double(cfg.temporal_kernels), C * double(cfg.depth_multiplier)};
      case kSepDepthW: return {double(cfg.sep_len) * m, double(cfg.sep_len)};
      case kSepPointW: return {m, double(cfg.sep_kernels)};
      case kDenseW: return {double(cfg.flat_size()), 1.0};
      default: return {1.0, 1.0};
    }
  };
  Rng rng(seed);
  for (auto id : {kTemporalW, kDepthW, kSepDepthW, kSepPointW, kDenseW}) {
    const auto [fan_in, fan_out] = fans(id);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& w : model.params[id]) w = rng.uniform(-limit, limit);
  }
  const std::array<std::size_t, 3> groups = {cfg.temporal_kernels, cfg.depthwise_maps(), cfg.sep_kernels};
  for (std::size_t i = 0; i < 3; ++i) {
    model.bn[i].mean.assign(groups[i], 0.0);
    model.bn[i].var.assign(groups[i], 1.0);
  }
  apply_max_norm(model);
  return model;
}

struct ForwardOptions {
  bool training = false;
  bool dropout = true;      // consulted only when training
  bool batch_stats = true;  // consulted only when training
  std::uint64_t seed = 0;   // dropout masks

  bool use_dropout() const { return training && dropout; }
  bool use_batch_stats() const { return training && batch_stats; }
};

struct LayerShape {
  std::string layer;
  std::vector<std::size_t> dims;
};

// Intermediates recorded by a forward pass and consumed by `backward`.
struct ForwardCache {
  bool valid = false;
  ForwardOptions options;
  std::size_t batch = 0;
  std::vector<double> x;
  std::array<std::vector<double>, 3> bn_mean, bn_var, bn_invstd;
  std::vector<double> xhat1;
  std::vector<double> xhat2, pre_act2;
  std::vector<double> mask1, drop1;
  std::vector<double> sep1;
  std::vector<double> xhat3, pre_act3;
  std::vector<double> mask2, drop2;
  std::vector<double> logits, probs;
  std::vector<LayerShape> trace;
};

namespace detail {

// Per-group statistics over a [B][G][L] buffer.
inline void group_stats(const std::vector<double>& z, std::size_t B, std::size_t G, std::size_t L,
                        std::vector<double>& mean, std::vector<double>& var) {
  mean.assign(G, 0.0);
  var.assign(G, 0.0);
  const double n = static_cast<double>(B * L);
  for (std::size_t g = 0; g < G; ++g) {
    double s = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double* p = z.data() + (b * G + g) * L;
      for (std::size_t i = 0; i < L; ++i) s += p[i];
    }
    const double mu = s / n;
    double ss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double* p = z.data() + (b * G + g) * L;
      for (std::size_t i = 0; i < L; ++i) ss += (p[i] - mu) * (p[i] - mu);
    }
    mean[g] = mu;
    var[g] = ss / n;
  }
}

inline void normalize(std::vector<double>& z, std::size_t B, std::size_t G, std::size_t L, const std::vector<double>& mean,
                      const std::vector<double>& invstd) {
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t g = 0; g < G; ++g) {
      double* p = z.data() + (b * G + g) * L;
      for (std::size_t i = 0; i < L; ++i) p[i] = (p[i] - mean[g]) * invstd[g];
    }
}

// `dy` holds dL/d(output) on entry and dL/d(input) on exit.
inline void batchnorm_backward(std::vector<double>& dy, const std::vector<double>& xhat, std::size_t B, std::size_t G,
                               std::size_t L, const std::vector<double>& gamma, const std::vector<double>& invstd,
                               bool batch_stats, std::vector<double>& dgamma, std::vector<double>& dbeta) {
  dgamma.assign(G, 0.0);
  dbeta.assign(G, 0.0);
  for (std::size_t g = 0; g < G; ++g) {
    double sg = 0.0, sb = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double* d = dy.data() + (b * G + g) * L;
      const double* xh = xhat.data() + (b * G + g) * L;
      for (std::size_t i = 0; i < L; ++i) {
        sg += d[i] * xh[i];
        sb += d[i];
      }
    }
    dgamma[g] = sg;
    dbeta[g] = sb;
  }
  const double n = static_cast<double>(B * L);
  for (std::size_t g = 0; g < G; ++g) {
    const double scale = gamma[g] * invstd[g];
    const double mean_db = dbeta[g] / n;
    const double mean_dg = dgamma[g] / n;
    for (std::size_t b = 0; b < B; ++b) {
      double* d = dy.data() + (b * G + g) * L;
      const double* xh = xhat.data() + (b * G + g) * L;
      if (batch_stats)
        for (std::size_t i = 0; i < L; ++i) d[i] = scale * (d[i] - mean_db - xh[i] * mean_dg);
      else
        for (std::size_t i = 0; i < L; ++i) d[i] *= scale;
    }
  }
}

inline double elu(double y, double alpha) { return y > 0.0 ? y : alpha * std::expm1(y); }
inline double elu_grad(double y, double alpha) { return y > 0.0 ? 1.0 : alpha * std::exp(y); }

// Ceil-mode average pooling along the last axis; the divisor counts only
// in-range elements.
inline void avg_pool(const std::vector<double>& in, std::size_t rows, std::size_t len, std::size_t pool,
                     std::vector<double>& out) {
  const std::size_t out_len = ceil_div(len, pool);
  out.assign(rows * out_len, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = in.data() + r * len;
    double* dst = out.data() + r * out_len;
    for (std::size_t i = 0; i < out_len; ++i) {
      const std::size_t lo = i * pool, hi = std::min(len, lo + pool);
      double s = 0.0;
      for (std::size_t t = lo; t < hi; ++t) s += src[t];
      dst[i] = s / static_cast<double>(hi - lo);
    }
  }
}

inline void avg_pool_backward(const std::vector<double>& dout, std::size_t rows, std::size_t len, std::size_t pool,
                              std::vector<double>& din) {
  const std::size_t out_len = ceil_div(len, pool);
  din.assign(rows * len, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = dout.data() + r * out_len;
    double* dst = din.data() + r * len;
    for (std::size_t i = 0; i < out_len; ++i) {
      const std::size_t lo = i * pool, hi = std::min(len, lo + pool);
      const double g = src[i] / static_cast<double>(hi - lo);
      for (std::size_t t = lo; t < hi; ++t) dst[t] = g;
    }
  }
}

inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline double clamped_sigmoid(double z) {
  z = std::clamp(z, -15.0, 15.0);
  return 1.0 / (1.0 + std::exp(-z));
}

inline void check_batch(const EEGNetConfig& c, const Tensor& batch) {
  const bool ok = (batch.shape.size() == 4 && batch.shape[3] == 1) || batch.shape.size() == 3;
  require(ok && batch.shape[0] > 0 && batch.shape[1] == c.n_channels && batch.shape[2] == c.n_timepoints,
          ErrorKind::ShapeMismatch,
          "batch shape " + shape_string(batch.shape) + " does not match [B," + std::to_string(c.n_channels) + "," +
              std::to_string(c.n_timepoints) + ",1]");
}

}  // namespace detail

inline ForwardCache forward_cached(const EEGNetModel& model, const Tensor& batch, const ForwardOptions& opts) {
  const auto& cfg = model.config;
  const auto& P = model.params;
  detail::check_batch(cfg, batch);
  const std::size_t B = batch.shape[0], C = cfg.n_channels, T = cfg.n_timepoints;
  const std::size_t K1 = cfg.temporal_kernels, F1 = cfg.temporal_len, D = cfg.depth_multiplier;
  const std::size_t M = cfg.depthwise_maps(), K2 = cfg.sep_kernels, F2 = cfg.sep_len;
  const std::size_t T1 = cfg.pooled1(), T2 = cfg.pooled2(), flat = cfg.flat_size();

  ForwardCache fc;
  fc.options = opts;
  fc.batch = B;
  fc.x = batch.data;
  fc.trace.push_back({"Input", {C, T, 1}});

  auto bn_params = [&](std::size_t i, const std::vector<double>& z, std::size_t G, std::size_t L) {
    if (opts.use_batch_stats()) {
      detail::group_stats(z, B, G, L, fc.bn_mean[i], fc.bn_var[i]);
    } else {
      fc.bn_mean[i] = model.bn[i].mean;
      fc.bn_var[i] = model.bn[i].var;
    }
    fc.bn_invstd[i].resize(G);
    for (std::size_t g = 0; g < G; ++g) fc.bn_invstd[i][g] = 1.0 / std::sqrt(fc.bn_var[i][g] + cfg.bn_epsilon);
  };

  // Temporal convolution, same padding along time.
  const std::size_t pad1 = (F1 - 1) / 2;
  fc.xhat1.assign(B * K1 * C * T, 0.0);
  std::vector<double> xp(T + F1 - 1);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      std::fill(xp.begin(), xp.end(), 0.0);
      std::copy_n(batch.data.data() + (b * C + c) * T, T, xp.begin() + static_cast<std::ptrdiff_t>(pad1));
      for (std::size_t k = 0; k < K1; ++k) {
        double* out = fc.xhat1.data() + ((b * K1 + k) * C + c) * T;
        const double* w = P[kTemporalW].data() + k * F1;
        for (std::size_t j = 0; j < F1; ++j) {
          const double wj = w[j];
          const double* src = xp.data() + j;
          for (std::size_t t = 0; t < T; ++t) out[t] += wj * src[t];
        }
      }
    }
  fc.trace.push_back({"Conv2D", {C, T, K1}});
  bn_params(0, fc.xhat1, K1, C * T);
  detail::normalize(fc.xhat1, B, K1, C * T, fc.bn_mean[0], fc.bn_invstd[0]);
  fc.trace.push_back({"BatchNorm2D", {C, T, K1}});

  // Depthwise spatial filter over the electrode axis.
  std::vector<double> z2(B * M * T, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t k = m / D;
      const double gamma = P[kBn1Gamma][k], beta = P[kBn1Beta][k];
      double* out = z2.data() + (b * M + m) * T;
      double wsum = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double w = P[kDepthW][m * C + c];
        wsum += w;
        const double coef = w * gamma;
        const double* src = fc.xhat1.data() + ((b * K1 + k) * C + c) * T;
        for (std::size_t t = 0; t < T; ++t) out[t] += coef * src[t];
      }
      const double shift = beta * wsum;
      for (std::size_t t = 0; t < T; ++t) out[t] += shift;
    }
  fc.trace.push_back({"DepthwiseConv2D", {1, T, M}});
  bn_params(1, z2, M, T);
  detail::normalize(z2, B, M, T, fc.bn_mean[1], fc.bn_invstd[1]);
  fc.xhat2 = z2;
  fc.pre_act2.resize(z2.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t i = (b * M + m) * T + t;
        fc.pre_act2[i] = P[kBn2Gamma][m] * fc.xhat2[i] + P[kBn2Beta][m];
        z2[i] = detail::elu(fc.pre_act2[i], cfg.elu_alpha);
      }
  fc.trace.push_back({"BatchNorm2D", {1, T, M}});

  Rng drop_rng(opts.seed);
  const double keep_scale = 1.0 / (1.0 - cfg.dropout);
  auto make_mask = [&](std::vector<double>& mask, std::size_t n) {
    mask.assign(n, 1.0);
    if (!opts.use_dropout() || cfg.dropout == 0.0) return;
    for (auto& v : mask) v = drop_rng.uniform() < cfg.dropout ? 0.0 : keep_scale;
  };

  std::vector<double> pooled;
  detail::avg_pool(z2, B * M, T, cfg.pool1, pooled);
  fc.trace.push_back({"AvgPool2D", {1, T1, M}});
  make_mask(fc.mask1, pooled.size());
  fc.drop1.resize(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) fc.drop1[i] = pooled[i] * fc.mask1[i];
  fc.trace.push_back({"Dropout", {1, T1, M}});

  // Separable convolution: per-map temporal filter, then pointwise mixing.
  const std::size_t pad2 = (F2 - 1) / 2;
  fc.sep1.assign(B * M * T1, 0.0);
  for (std::size_t r = 0; r < B * M; ++r) {
    const std::size_t m = r % M;
    const double* src = fc.drop1.data() + r * T1;
    double* out = fc.sep1.data() + r * T1;
    const double* w = P[kSepDepthW].data() + m * F2;
    for (std::size_t j = 0; j < F2; ++j) {
      // out[t] += w[j] * src[t + j - pad2] over valid t.
      const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(pad2);
      const std::size_t t_lo = off < 0 ? static_cast<std::size_t>(-off) : 0;
      const std::size_t t_hi = off > 0 ? (T1 > static_cast<std::size_t>(off) ? T1 - static_cast<std::size_t>(off) : 0) : T1;
      for (std::size_t t = t_lo; t < t_hi; ++t) out[t] += w[j] * src[static_cast<std::ptrdiff_t>(t) + off];
    }
  }
  std::vector<double> z3(B * K2 * T1, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < K2; ++k) {
      double* out = z3.data() + (b * K2 + k) * T1;
      for (std::size_t m = 0; m < M; ++m) {
        const double w = P[kSepPointW][k * M + m];
        const double* src = fc.sep1.data() + (b * M + m) * T1;
        for (std::size_t t = 0; t < T1; ++t) out[t] += w * src[t];
      }
    }
  fc.trace.push_back({"SeparableConv2D", {1, T1, K2}});
  bn_params(2, z3, K2, T1);
  detail::normalize(z3, B, K2, T1, fc.bn_mean[2], fc.bn_invstd[2]);
  fc.xhat3 = z3;
  fc.pre_act3.resize(z3.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < K2; ++k)
      for (std::size_t t = 0; t < T1; ++t) {
        const std::size_t i = (b * K2 + k) * T1 + t;
        fc.pre_act3[i] = P[kBn3Gamma][k] * fc.xhat3[i] + P[kBn3Beta][k];
        z3[i] = detail::elu(fc.pre_act3[i], cfg.elu_alpha);
      }
  fc.trace.push_back({"BatchNorm2D", {1, T1, K2}});

  detail::avg_pool(z3, B * K2, T1, cfg.pool2, pooled);
  fc.trace.push_back({"AvgPool2D", {1, T2, K2}});
  make_mask(fc.mask2, pooled.size());
  fc.drop2.resize(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) fc.drop2[i] = pooled[i] * fc.mask2[i];
  fc.trace.push_back({"Dropout", {1, T2, K2}});
  fc.trace.push_back({"Flatten", {flat}});

  fc.logits.resize(B);
  fc.probs.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    fc.logits[b] = detail::dot(P[kDenseW].data(), fc.drop2.data() + b * flat, flat) + P[kDenseB][0];
    fc.probs[b] = detail::clamped_sigmoid(fc.logits[b]);
  }
  fc.trace.push_back({"Dense", {1}});
  fc.valid = true;
  return fc;
}

inline Tensor forward(const EEGNetModel& model, const Tensor& batch, const ForwardOptions& opts) {
  auto fc = forward_cached(model, batch, opts);
  return Tensor({fc.batch, 1}, std::move(fc.probs));
}

inline Tensor forward(const EEGNetModel& model, const Tensor& batch, bool training, std::uint64_t seed) {
  ForwardOptions o;
  o.training = training;
  o.seed = seed;
  return forward(model, batch, o);
}

inline double bce_loss(std::span<const double> probs, std::span<const int> labels) {
  require(probs.size() == labels.size() && !probs.empty(), ErrorKind::ShapeMismatch,
          "probabilities and labels differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], 1e-7, 1.0 - 1e-7);
    s += labels[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return s / static_cast<double>(probs.size());
}

inline double bce_loss(const Tensor& probs, std::span<const int> labels) {
  require(probs.shape.size() == 2 && probs.shape[1] == 1, ErrorKind::ShapeMismatch, "probabilities must be [B,1]");
  return bce_loss(std::span<const double>(probs.data), labels);
}

// Exact gradients of the mean binary cross-entropy with respect to every
// parameter, given the intermediates of a forward pass.
inline ParamSet backward(const EEGNetModel& model, const ForwardCache& fc, std::span<const int> labels) {
  require(fc.valid, ErrorKind::NotForwarded, "backward called without a recorded forward pass");
  require(labels.size() == fc.batch, ErrorKind::ShapeMismatch, "label count does not match batch");
  const auto& cfg = model.config;
  const auto& P = model.params;
  const std::size_t B = fc.batch, C = cfg.n_channels, T = cfg.n_timepoints;
  const std::size_t K1 = cfg.temporal_kernels, F1 = cfg.temporal_len, D = cfg.depth_multiplier;
  const std::size_t M = cfg.depthwise_maps(), K2 = cfg.sep_kernels, F2 = cfg.sep_len;
  const std::size_t T1 = cfg.pooled1(), flat = cfg.flat_size();
  const bool batch_stats = fc.options.use_batch_stats();

  ParamSet g;
  const auto sizes = param_sizes(cfg);
  for (std::size_t p = 0; p < kParamCount; ++p) g[p].assign(sizes[p], 0.0);

  // Dense + sigmoid + BCE.
  std::vector<double> dflat(B * flat);
  for (std::size_t b = 0; b < B; ++b) {
    const double z = fc.logits[b];
    const double dz = std::abs(z) > 15.0 ? 0.0 : (fc.probs[b] - labels[b]) / static_cast<double>(B);
    g[kDenseB][0] += dz;
    const double* a = fc.drop2.data() + b * flat;
    for (std::size_t i = 0; i < flat; ++i) {
      g[kDenseW][i] += dz * a[i];
      dflat[b * flat + i] = dz * P[kDenseW][i] * fc.mask2[b * flat + i];
    }
  }

  // Pool 2, ELU, BN 3.
  std::vector<double> d3;
  detail::avg_pool_backward(dflat, B * K2, T1, cfg.pool2, d3);
  for (std::size_t i = 0; i < d3.size(); ++i) d3[i] *= detail::elu_grad(fc.pre_act3[i], cfg.elu_alpha);
  detail::batchnorm_backward(d3, fc.xhat3, B, K2, T1, P[kBn3Gamma], fc.bn_invstd[2], batch_stats, g[kBn3Gamma],
                             g[kBn3Beta]);

  // Pointwise.
  std::vector<double> dsep(B * M * T1, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < K2; ++k) {
      const double* dz = d3.data() + (b * K2 + k) * T1;
      for (std::size_t m = 0; m < M; ++m) {
        const double* s = fc.sep1.data() + (b * M + m) * T1;
        g[kSepPointW][k * M + m] += detail::dot(dz, s, T1);
        const double w = P[kSepPointW][k * M + m];
        double* ds = dsep.data() + (b * M + m) * T1;
        for (std::size_t t = 0; t < T1; ++t) ds[t] += w * dz[t];
      }
    }

  // Separable depthwise temporal filter.
  const std::size_t pad2 = (F2 - 1) / 2;
  std::vector<double> ddrop1(B * M * T1, 0.0);
  for (std::size_t r = 0; r < B * M; ++r) {
    const std::size_t m = r % M;
    const double* ds = dsep.data() + r * T1;
    const double* src = fc.drop1.data() + r * T1;
    double* dd = ddrop1.data() + r * T1;
    const double* w = P[kSepDepthW].data() + m * F2;
    for (std::size_t j = 0; j < F2; ++j) {
      const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(pad2);
      const std::size_t t_lo = off < 0 ? static_cast<std::size_t>(-off) : 0;
      const std::size_t t_hi = off > 0 ? (T1 > static_cast<std::size_t>(off) ? T1 - static_cast<std::size_t>(off) : 0) : T1;
      double s = 0.0;
      for (std::size_t t = t_lo; t < t_hi; ++t) {
        s += ds[t] * src[static_cast<std::ptrdiff_t>(t) + off];
        dd[static_cast<std::ptrdiff_t>(t) + off] += ds[t] * w[j];
      }
      g[kSepDepthW][m * F2 + j] += s;
    }
  }

  // Dropout 1, pool 1, ELU, BN 2.
  for (std::size_t i = 0; i < ddrop1.size(); ++i) ddrop1[i] *= fc.mask1[i];
  std::vector<double> d2;
  detail::avg_pool_backward(ddrop1, B * M, T, cfg.pool1, d2);
  for (std::size_t i = 0; i < d2.size(); ++i) d2[i] *= detail::elu_grad(fc.pre_act2[i], cfg.elu_alpha);
  detail::batchnorm_backward(d2, fc.xhat2, B, M, T, P[kBn2Gamma], fc.bn_invstd[1], batch_stats, g[kBn2Gamma],
                             g[kBn2Beta]);

  // Depthwise spatial filter and BN 1, processed one temporal map at a time.
  const std::size_t pad1 = (F1 - 1) / 2;
  std::vector<double> dy1(B * C * T);
  std::vector<double> xp(T + F1 - 1);
  for (std::size_t k = 0; k < K1; ++k) {
    const double gamma = P[kBn1Gamma][k], beta = P[kBn1Beta][k];
    std::fill(dy1.begin(), dy1.end(), 0.0);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t d = 0; d < D; ++d) {
        const std::size_t m = k * D + d;
        const double* dz = d2.data() + (b * M + m) * T;
        for (std::size_t c = 0; c < C; ++c) {
          const double* xh = fc.xhat1.data() + ((b * K1 + k) * C + c) * T;
          double sx = 0.0, sd = 0.0;
          for (std::size_t t = 0; t < T; ++t) {
            sx += dz[t] * xh[t];
            sd += dz[t];
          }
          g[kDepthW][m * C + c] += gamma * sx + beta * sd;
          const double w = P[kDepthW][m * C + c];
          double* dy = dy1.data() + (b * C + c) * T;
          for (std::size_t t = 0; t < T; ++t) dy[t] += w * dz[t];
        }
      }
    // BN 1 for this map: dy1 -> dz1.
    double sg = 0.0, sb = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double* xh = fc.xhat1.data() + (b * K1 + k) * C * T;
      const double* dy = dy1.data() + b * C * T;
      for (std::size_t i = 0; i < C * T; ++i) {
        sg += dy[i] * xh[i];
        sb += dy[i];
      }
    }
    g[kBn1Gamma][k] = sg;
    g[kBn1Beta][k] = sb;
    const double n = static_cast<double>(B * C * T);
    const double scale = gamma * fc.bn_invstd[0][k];
    for (std::size_t b = 0; b < B; ++b) {
      const double* xh = fc.xhat1.data() + (b * K1 + k) * C * T;
      double* dy = dy1.data() + b * C * T;
      if (batch_stats)
        for (std::size_t i = 0; i < C * T; ++i) dy[i] = scale * (dy[i] - sb / n - xh[i] * sg / n);
      else
        for (std::size_t i = 0; i < C * T; ++i) dy[i] *= scale;
    }
    // Temporal filter weights.
    double* gw = g[kTemporalW].data() + k * F1;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) {
        std::fill(xp.begin(), xp.end(), 0.0);
        std::copy_n(fc.x.data() + (b * C + c) * T, T, xp.begin() + static_cast<std::ptrdiff_t>(pad1));
        const double* dz = dy1.data() + (b * C + c) * T;
        for (std::size_t j = 0; j < F1; ++j) gw[j] += detail::dot(dz, xp.data() + j, T);
      }
  }
  return g;
}

inline void update_running_stats(EEGNetModel& model, const ForwardCache& fc) {
  require(fc.valid && fc.options.use_batch_stats(), ErrorKind::NotForwarded,
          "running statistics need a training forward pass with batch statistics");
  const double mom = model.config.bn_momentum;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t g = 0; g < model.bn[i].mean.size(); ++g) {
      model.bn[i].mean[g] = mom * model.bn[i].mean[g] + (1.0 - mom) * fc.bn_mean[i][g];
      model.bn[i].var[g] = mom * model.bn[i].var[g] + (1.0 - mom) * fc.bn_var[i][g];
    }
}

// Bias-corrected Adam followed by max-norm projection.
inline void adam_step(EEGNetModel& model, const ParamSet& grads) {
  auto& a = model.adam;
  for (std::size_t p = 0; p < kParamCount; ++p)
    require(grads[p].size() == model.params[p].size(), ErrorKind::ShapeMismatch,
            "gradient for " + std::string(kParamNames[p]) + " has the wrong size");
  ++a.step;
  const double lr = model.config.learning_rate;
  const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(a.step));
  const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(a.step));
  for (std::size_t p = 0; p < kParamCount; ++p) {
    auto& w = model.params[p];
    auto& m = a.m[p];
    auto& v = a.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = grads[p][i];
      m[i] = a.beta1 * m[i] + (1.0 - a.beta1) * gi;
      v[i] = a.beta2 * v[i] + (1.0 - a.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + a.epsilon);
    }
  }
  apply_max_norm(model);
}

// Samples stored contiguously as [N][C][T].
struct EEGDataset {
  std::size_t channels = 0;
  std::size_t timepoints = 0;
  std::vector<double> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  std::size_t sample_size() const { return channels * timepoints; }

  void add(std::span<const double> sample, int label) {
    require(sample.size() == sample_size(), ErrorKind::ShapeMismatch, "sample size does not match dataset");
    x.insert(x.end(), sample.begin(), sample.end());
    y.push_back(label);
  }

  Tensor batch(std::span<const std::size_t> idx) const {
    Tensor t({idx.size(), channels, timepoints, 1});
    const std::size_t s = sample_size();
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy_n(x.data() + idx[i] * s, s, t.data.data() + i * s);
    return t;
  }

  EEGDataset subset(std::span<const std::size_t> idx) const {
    EEGDataset out{channels, timepoints, {}, {}};
    out.x.reserve(idx.size() * sample_size());
    for (auto i : idx) out.add({x.data() + i * sample_size(), sample_size()}, y[i]);
    return out;
  }
};

struct TrainHistory {
  std::vector<double> loss;
  std::vector<double> accuracy;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;

  bool operator==(const TrainHistory&) const = default;
};

inline std::vector<double> predict_proba(const EEGNetModel& model, const EEGDataset& data, std::size_t batch_size = 64) {
  std::vector<double> out;
  out.reserve(data.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    auto probs = forward(model, data.batch(idx), ForwardOptions{});
    out.insert(out.end(), probs.data.begin(), probs.data.end());
  }
  return out;
}

inline std::vector<int> predict_labels(const EEGNetModel& model, const EEGDataset& data) {
  std::vector<int> out;
  for (double p : predict_proba(model, data)) out.push_back(p >= 0.5 ? 1 : 0);
  return out;
}

// Seeded mini-batch training; the final partial batch is kept.
inline TrainHistory train(EEGNetModel& model, const EEGDataset& train_set, const EEGDataset* val_set,
                          std::uint64_t seed) {
  const auto& cfg = model.config;
  require(train_set.size() > 0, ErrorKind::EmptyDataset, "training set is empty");
  require(train_set.channels == cfg.n_channels && train_set.timepoints == cfg.n_timepoints, ErrorKind::ShapeMismatch,
          "training samples do not match the network input shape");
  TrainHistory hist;
  model.training = true;
  auto order = iota_indices(train_set.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, 2 * epoch + 1));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0, bi = 0; start < order.size(); start += cfg.batch_size, ++bi) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<int> labels;
      for (auto i : idx) labels.push_back(train_set.y[i]);
      ForwardOptions opts;
      opts.training = true;
      opts.seed = derive_seed(seed, (epoch + 1) * 1000003ULL + bi);
      const auto fc = forward_cached(model, train_set.batch(idx), opts);
      loss_sum += bce_loss(fc.probs, labels) * static_cast<double>(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) correct += ((fc.probs[i] >= 0.5) == (labels[i] == 1));
      const auto grads = backward(model, fc, labels);
      update_running_stats(model, fc);
      adam_step(model, grads);
    }
    hist.loss.push_back(loss_sum / static_cast<double>(train_set.size()));
    hist.accuracy.push_back(static_cast<double>(correct) / static_cast<double>(train_set.size()));
    if (val_set && val_set->size() > 0) {
      const auto probs = predict_proba(model, *val_set);
      hist.val_loss.push_back(bce_loss(probs, val_set->y));
      std::size_t vc = 0;
      for (std::size_t i = 0; i < probs.size(); ++i) vc += ((probs[i] >= 0.5) == (val_set->y[i] == 1));
      hist.val_accuracy.push_back(static_cast<double>(vc) / static_cast<double>(probs.size()));
    }
  }
  model.training = false;
  return hist;
}

// Shape bookkeeping derived from the configuration alone.
inline std::vector<LayerShape> shape_trace(const EEGNetConfig& c) {
  const std::size_t C = c.n_channels, T = c.n_timepoints, K1 = c.temporal_kernels, M = c.depthwise_maps();
  const std::size_t K2 = c.sep_kernels, T1 = c.pooled1(), T2 = c.pooled2();
  return {{"Input", {C, T, 1}},          {"Conv2D", {C, T, K1}},           {"BatchNorm2D", {C, T, K1}},
          {"DepthwiseConv2D", {1, T, M}}, {"BatchNorm2D", {1, T, M}},       {"AvgPool2D", {1, T1, M}},
          {"Dropout", {1, T1, M}},        {"SeparableConv2D", {1, T1, K2}}, {"BatchNorm2D", {1, T1, K2}},
          {"AvgPool2D", {1, T2, K2}},     {"Dropout", {1, T2, K2}},         {"Flatten", {c.flat_size()}},
          {"Dense", {1}}};
}

}  // namespace drivattn
