#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "drivattn/error.hpp"
#include "drivattn/recdata.hpp"

namespace drivattn {

enum class StatKind : std::uint8_t { Wilcoxon, Pearson };

struct StatResult {
  StatKind kind = StatKind::Wilcoxon;
  double statistic = 0.0;  // Z for Wilcoxon, r for Pearson
  double p_value = 1.0;    // two-tailed
  std::size_t n = 0;
};

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, ErrorKind::ConfigInvalid, "incomplete beta needs positive shape parameters");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

// Two-tailed p of a Student-t statistic with `df` degrees of freedom.
inline double student_t_two_tailed(double t, double df) {
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

// Midranks (1-based) of `v`; equal values share the mean of their ranks.
inline std::vector<double> midranks(std::span<const double> v) {
  auto order = iota_indices(v.size());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

// Wilcoxon signed-ranks test, normal approximation with tie-corrected
// variance and a 0.5 continuity correction. Z carries the sign of W+ - W-.
inline StatResult wilcoxon_signed_ranks(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::LengthMismatch, "paired samples differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);
  require(!d.empty(), ErrorKind::AllZeroDifferences, "all paired differences are zero");
  const std::size_t n = d.size();
  require(n >= 5, ErrorKind::TooFewPairs, "need at least 5 non-zero differences, got " + std::to_string(n));

  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(d[i]);
  const auto ranks = midranks(mag);
  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < n; ++i) (d[i] > 0 ? w_plus : w_minus) += ranks[i];

  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double nn = static_cast<double>(n);
  const double mu = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  const double w = std::min(w_plus, w_minus);
  const double z_abs = var > 0.0 ? std::max(0.0, std::abs(w - mu) - 0.5) / std::sqrt(var) : 0.0;
  const double sign = w_plus > w_minus ? 1.0 : (w_plus < w_minus ? -1.0 : 0.0);
  StatResult r;
  r.kind = StatKind::Wilcoxon;
  r.statistic = sign * z_abs;
  r.p_value = std::min(1.0, std::erfc(z_abs / std::numbers::sqrt2));
  r.n = n;
  return r;
}

inline StatResult pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::LengthMismatch, "pearson inputs differ in length");
  const std::size_t n = x.size();
  require(n >= 3, ErrorKind::TooFewPairs, "pearson needs at least 3 pairs");
  const double nn = static_cast<double>(n);
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nn;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nn;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0 && syy > 0.0, ErrorKind::ZeroVariance, "pearson input has zero variance");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = nn - 2.0;
  StatResult res;
  res.kind = StatKind::Pearson;
  res.statistic = r;
  res.n = n;
  if (df <= 0.0)
    res.p_value = 1.0;
  else if (std::abs(r) >= 1.0)
    res.p_value = 0.0;
  else
    res.p_value = student_t_two_tailed(r * std::sqrt(df / (1.0 - r * r)), df);
  return res;
}

inline double rt_dispersion(std::span<const double> rts) {
  require(rts.size() >= 2, ErrorKind::TooFewTrials, "RT dispersion needs at least two trials");
  const double n = static_cast<double>(rts.size());
  const double mean = std::accumulate(rts.begin(), rts.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : rts) ss += (r - mean) * (r - mean);
  return std::sqrt(ss / n);
}

// Population RT standard deviation of one subject within one session condition.
inline double rt_dispersion(const std::vector<Recording>& recordings, std::uint16_t subject, Session session) {
  std::vector<double> rts;
  for (const auto& rec : recordings) {
    if (rec.subject_id != subject || rec.session != session) continue;
    const auto r = compute_reaction_times(rec);
    rts.insert(rts.end(), r.begin(), r.end());
  }
  return rt_dispersion(rts);
}

}  // namespace drivattn
