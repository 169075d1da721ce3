#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drivattn/error.hpp"
#include "drivattn/matrix.hpp"
#include "drivattn/random.hpp"

namespace drivattn {

// Per-feature z-scoring with training-set statistics (population std).
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> zero_variance;

  std::size_t n_features() const { return mean.size(); }

  void apply_inplace(std::span<double> row) const {
    require(row.size() == mean.size(), ErrorKind::DimensionMismatch, "feature count does not match standardizer");
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / stddev[j];
  }

  MatrixD apply(const MatrixD& X) const {
    MatrixD out = X;
    for (std::size_t i = 0; i < out.rows(); ++i) apply_inplace(out.row(i));
    return out;
  }

  bool operator==(const Standardizer&) const = default;
};

inline std::pair<Standardizer, MatrixD> standardize_fit_apply(const MatrixD& X) {
  require(X.rows() >= 2, ErrorKind::TooFewRows, "standardization needs at least two rows");
  Standardizer s;
  const std::size_t n = X.rows(), d = X.cols();
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 1.0);
  s.zero_variance.assign(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += X(i, j);
    const double mu = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (X(i, j) - mu) * (X(i, j) - mu);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    s.mean[j] = mu;
    if (sd > 0.0 && std::isfinite(sd))
      s.stddev[j] = sd;
    else
      s.zero_variance[j] = true;
  }
  return {s, s.apply(X)};
}

enum class KernelType : std::uint8_t { Linear, Rbf };

struct SvmConfig {
  double C = 1.0;
  KernelType kernel = KernelType::Rbf;
  std::optional<double> gamma;  // RBF width; unset -> default_gamma of the training matrix
  double tol = 1e-3;
  std::size_t max_passes = 50;
  bool standardize = true;
  bool record_objective = false;
};

inline void validate(const SvmConfig& c) {
  require(c.C > 0.0, ErrorKind::ConfigInvalid, "SVM C must be positive");
  require(!c.gamma || *c.gamma > 0.0, ErrorKind::ConfigInvalid, "RBF gamma must be positive");
  require(c.tol > 0.0, ErrorKind::ConfigInvalid, "SVM tolerance must be positive");
  require(c.max_passes > 0, ErrorKind::ConfigInvalid, "max_passes must be positive");
}

struct SvmModel {
  KernelType kernel = KernelType::Rbf;
  double gamma = 1.0;
  double C = 1.0;
  MatrixD support_vectors;        // standardized space when `standardize`
  std::vector<double> dual_coef;  // alpha_i * y_i
  double bias = 0.0;
  bool standardize = true;
  Standardizer scaler;

  std::size_t n_features() const { return support_vectors.cols(); }

  bool operator==(const SvmModel&) const = default;
};

inline double kernel_value(KernelType k, double gamma, std::span<const double> a, std::span<const double> b) {
  if (k == KernelType::Linear) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-gamma * d2);
}

struct SvmFit {
  SvmModel model;
  std::vector<double> alpha;  // one per training row
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective;  // dual objective after each accepted update
};

// 1 / (n_features * mean per-feature population variance).
inline double default_gamma(const MatrixD& X) {
  const std::size_t n = X.rows(), d = X.cols();
  double mean_var = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += X(i, j);
    mu /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (X(i, j) - mu) * (X(i, j) - mu);
    mean_var += ss / static_cast<double>(n);
  }
  mean_var /= static_cast<double>(d);
  return mean_var > 0.0 ? 1.0 / (static_cast<double>(d) * mean_var) : 1.0;
}

// Sequential minimal optimization on the C-SVM dual. The working pair is the
// maximal KKT violator i together with the partner j that maximizes the error
// gap |E_i - E_j| among feasible directions; a seeded random partner is tried
// when that pair makes no progress.
inline SvmFit svm_fit(const MatrixD& X_in, const std::vector<int>& y, const SvmConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const std::size_t n = X_in.rows();
  require(y.size() == n, ErrorKind::DimensionMismatch, "label count does not match rows");
  require(n > 0 && X_in.cols() > 0, ErrorKind::EmptyDataset, "empty training set");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    require(v == 1 || v == -1, ErrorKind::ConfigInvalid, "SVM labels must be -1 or +1");
    (v > 0 ? has_pos : has_neg) = true;
  }
  require(has_pos && has_neg, ErrorKind::SingleClassInput, "SVM training needs both classes");
  for (double v : X_in.data()) require(std::isfinite(v), ErrorKind::Format, "non-finite feature value");

  SvmFit fit;
  auto& model = fit.model;
  model.kernel = cfg.kernel;
  model.C = cfg.C;
  model.standardize = cfg.standardize;
  MatrixD X;
  if (cfg.standardize) {
    require(n >= 2, ErrorKind::TooFewRows, "standardization needs at least two rows");
    auto [s, Xs] = standardize_fit_apply(X_in);
    model.scaler = std::move(s);
    X = std::move(Xs);
  } else {
    X = X_in;
  }
  model.gamma = cfg.gamma ? *cfg.gamma : default_gamma(X);

  // Q_ij = y_i y_j K(x_i, x_j), kept whole: training sets here are small.
  std::vector<double> Q(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double q = y[i] * y[j] * kernel_value(model.kernel, model.gamma, X.row(i), X.row(j));
      Q[i * n + j] = Q[j * n + i] = q;
    }

  const double C = cfg.C;
  constexpr double kTau = 1e-12;
  std::vector<double> alpha(n, 0.0), G(n, -1.0);
  auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0); };
  auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < C); };
  auto objective = [&] {
    double s = 0.0;
    for (std::size_t t = 0; t < n; ++t) s += alpha[t] * (1.0 - G[t]);
    return 0.5 * s;
  };

  // Analytic two-variable update with box clipping; returns whether alpha moved.
  auto update_pair = [&](std::size_t i, std::size_t j) {
    const double ai = alpha[i], aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = Q[i * n + i] + Q[j * n + j] + 2.0 * Q[i * n + j];
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
      if (diff > 0) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
      } else if (alpha[j] > C) { alpha[j] = C; alpha[i] = C + diff; }
    } else {
      double quad = Q[i * n + i] + Q[j * n + j] - 2.0 * Q[i * n + j];
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
      } else if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
      if (sum > C) {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
      } else if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
    }
    const double di = alpha[i] - ai, dj = alpha[j] - aj;
    if (di == 0.0 && dj == 0.0) return false;
    for (std::size_t t = 0; t < n; ++t) G[t] += Q[i * n + t] * di + Q[j * n + t] * dj;
    return true;
  };

  Rng rng(seed);
  const std::size_t max_iter = cfg.max_passes * std::max<std::size_t>(n, 100) * 10;
  while (fit.iterations < max_iter) {
    // i: largest -y G over I_up; partner bound M: smallest -y G over I_low.
    std::size_t i = n;
    double m_up = -INFINITY, m_low = INFINITY;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * G[t];
      if (in_up(t) && v > m_up) { m_up = v; i = t; }
      if (in_low(t) && v < m_low) m_low = v;
    }
    if (i == n || m_up - m_low <= cfg.tol) {
      fit.converged = true;
      break;
    }
    std::size_t j = n;
    double best_gap = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      if (t == i || !in_low(t)) continue;
      const double gap = m_up + y[t] * G[t];  // E_t - E_i
      if (gap > best_gap) { best_gap = gap; j = t; }
    }
    bool moved = j != n && update_pair(i, j);
    if (!moved) {
      std::vector<std::size_t> cand;
      for (std::size_t t = 0; t < n; ++t)
        if (t != i && in_low(t) && m_up + y[t] * G[t] > 0) cand.push_back(t);
      rng.shuffle(cand);
      for (auto t : cand)
        if ((moved = update_pair(i, t))) break;
    }
    ++fit.iterations;
    if (!moved) break;
    if (cfg.record_objective) fit.objective.push_back(objective());
  }

  // Bias: mean of -y G over free vectors, else the midpoint of the feasible interval.
  double up = -INFINITY, low = INFINITY, free_sum = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double v = -y[t] * G[t];
    if (alpha[t] > 0 && alpha[t] < C) {
      free_sum += v;
      ++n_free;
    }
    if (in_up(t)) up = std::max(up, v);
    if (in_low(t)) low = std::min(low, v);
  }
  model.bias = n_free ? free_sum / static_cast<double>(n_free) : 0.5 * (up + low);

  std::vector<std::size_t> sv;
  for (std::size_t t = 0; t < n; ++t)
    if (alpha[t] > 0) sv.push_back(t);
  model.support_vectors = MatrixD(sv.size(), X.cols());
  for (std::size_t k = 0; k < sv.size(); ++k) {
    std::copy(X.row(sv[k]).begin(), X.row(sv[k]).end(), model.support_vectors.row(k).begin());
    model.dual_coef.push_back(alpha[sv[k]] * y[sv[k]]);
  }
  fit.alpha = std::move(alpha);
  return fit;
}

inline SvmModel svm_train(const MatrixD& X, const std::vector<int>& y, const SvmConfig& cfg, std::uint64_t seed) {
  return svm_fit(X, y, cfg, seed).model;
}

inline double svm_decision(const SvmModel& model, std::span<const double> x_raw) {
  require(x_raw.size() == model.n_features(), ErrorKind::DimensionMismatch,
          "expected " + std::to_string(model.n_features()) + " features, got " + std::to_string(x_raw.size()));
  std::vector<double> x(x_raw.begin(), x_raw.end());
  if (model.standardize) model.scaler.apply_inplace(x);
  double f = model.bias;
  for (std::size_t k = 0; k < model.dual_coef.size(); ++k)
    f += model.dual_coef[k] * kernel_value(model.kernel, model.gamma, model.support_vectors.row(k), x);
  return f;
}

struct SvmPrediction {
  std::vector<int> labels;  // sign(f), f == 0 -> +1
  std::vector<double> margins;
};

inline SvmPrediction svm_predict(const SvmModel& model, const MatrixD& X) {
  SvmPrediction out;
  if (X.rows() == 0) return out;
  require(X.cols() == model.n_features(), ErrorKind::DimensionMismatch,
          "expected " + std::to_string(model.n_features()) + " features, got " + std::to_string(X.cols()));
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double f = svm_decision(model, X.row(i));
    out.margins.push_back(f);
    out.labels.push_back(f >= 0.0 ? 1 : -1);
  }
  return out;
}

inline void validate(const SvmModel& m) {
  require(m.support_vectors.rows() > 0, ErrorKind::InvalidModel, "SVM model has no support vectors");
  require(m.dual_coef.size() == m.support_vectors.rows(), ErrorKind::InvalidModel,
          "dual coefficient count does not match support vectors");
  require(!m.standardize || m.scaler.n_features() == m.n_features(), ErrorKind::InvalidModel,
          "standardizer width does not match support vectors");
  require(m.gamma > 0.0 && m.C > 0.0, ErrorKind::InvalidModel, "SVM hyperparameters out of range");
  for (double c : m.dual_coef)
    require(std::abs(c) <= m.C * (1.0 + 1e-12), ErrorKind::InvalidModel, "dual coefficient outside [0, C]");
}

}  // namespace drivattn
