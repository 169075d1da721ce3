#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "drivattn/error.hpp"
#include "drivattn/matrix.hpp"

namespace drivattn {

using cplx = std::complex<double>;

namespace detail {

// Plain complex product; skips the inf/nan recovery of operator*.
inline cplx cmul(cplx a, cplx b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

inline bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative radix-2 transform; `twiddle[j] = exp(-2 pi i j / n)`.
inline void fft_pow2(std::vector<cplx>& a, const std::vector<cplx>& twiddle, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cplx w = inverse ? std::conj(twiddle[k * step]) : twiddle[k * step];
        const cplx u = a[i + k];
        const cplx v = cmul(a[i + k + len / 2], w);
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

inline std::vector<cplx> make_twiddles(std::size_t n) {
  std::vector<cplx> tw(n / 2 + 1);
  for (std::size_t j = 0; j < tw.size(); ++j)
    tw[j] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n));
  return tw;
}

}  // namespace detail

// Precomputed forward/inverse DFT of a fixed length. Power-of-two lengths use
// radix-2 directly; any other length goes through Bluestein's chirp-z
// convolution on a power-of-two grid.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    require(n > 0, ErrorKind::EmptyInput, "transform of an empty signal");
    if (detail::is_pow2(n)) {
      m_ = n;
      twiddle_ = detail::make_twiddles(n);
      return;
    }
    m_ = detail::next_pow2(2 * n - 1);
    twiddle_ = detail::make_twiddles(m_);
    chirp_.resize(n);
    // n^2 mod 2N keeps the chirp angle exact for large n.
    const std::uint64_t two_n = 2 * static_cast<std::uint64_t>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t sq = (static_cast<std::uint64_t>(i) * i) % two_n;
      chirp_[i] = std::polar(1.0, -std::numbers::pi * static_cast<double>(sq) / static_cast<double>(n));
    }
    kernel_.assign(m_, cplx{});
    kernel_[0] = std::conj(chirp_[0]);
    for (std::size_t i = 1; i < n; ++i) kernel_[i] = kernel_[m_ - i] = std::conj(chirp_[i]);
    detail::fft_pow2(kernel_, twiddle_, false);
  }

  std::size_t size() const { return n_; }

  std::vector<cplx> forward(std::span<const cplx> x) const { return run(x, false); }

  std::vector<cplx> forward(std::span<const double> x) const {
    std::vector<cplx> c(x.begin(), x.end());
    return run(c, false);
  }

  // Includes the 1/N normalization.
  std::vector<cplx> inverse(std::span<const cplx> x) const {
    auto out = run(x, true);
    for (auto& v : out) v /= static_cast<double>(n_);
    return out;
  }

 private:
  std::vector<cplx> run(std::span<const cplx> x, bool inverse) const {
    require(x.size() == n_, ErrorKind::LengthMismatch, "signal length does not match plan");
    if (chirp_.empty()) {
      std::vector<cplx> a(x.begin(), x.end());
      detail::fft_pow2(a, twiddle_, inverse);
      return a;
    }
    // The inverse transform is the conjugate of the forward transform of the conjugate.
    std::vector<cplx> a(m_, cplx{});
    for (std::size_t i = 0; i < n_; ++i) a[i] = detail::cmul(inverse ? std::conj(x[i]) : x[i], chirp_[i]);
    detail::fft_pow2(a, twiddle_, false);
    for (std::size_t i = 0; i < m_; ++i) a[i] = detail::cmul(a[i], kernel_[i]);
    detail::fft_pow2(a, twiddle_, true);
    std::vector<cplx> out(n_);
    const double scale = 1.0 / static_cast<double>(m_);
    for (std::size_t k = 0; k < n_; ++k) {
      const cplx v = detail::cmul(a[k] * scale, chirp_[k]);
      out[k] = inverse ? std::conj(v) : v;
    }
    return out;
  }

  std::size_t n_;
  std::size_t m_ = 0;
  std::vector<cplx> twiddle_;
  std::vector<cplx> chirp_;
  std::vector<cplx> kernel_;
};

inline std::vector<cplx> dft(std::span<const double> signal) {
  require(!signal.empty(), ErrorKind::EmptyInput, "dft of an empty signal");
  return FftPlan(signal.size()).forward(signal);
}

inline std::vector<cplx> idft(std::span<const cplx> spectrum) {
  require(!spectrum.empty(), ErrorKind::EmptyInput, "idft of an empty spectrum");
  return FftPlan(spectrum.size()).inverse(spectrum);
}

struct PsdBin {
  double freq_hz;
  double psd;
};

// One-sided periodogram, rectangular window, density scaling 1/(fs N).
inline std::vector<PsdBin> periodogram(const FftPlan& plan, std::span<const double> signal, double fs) {
  const std::size_t n = signal.size();
  require(n >= 2, ErrorKind::EmptyInput, "periodogram needs at least two samples");
  const auto spectrum = plan.forward(signal);
  std::vector<PsdBin> out(n / 2 + 1);
  const double norm = 1.0 / (fs * static_cast<double>(n));
  for (std::size_t k = 0; k < out.size(); ++k) {
    const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
    out[k] = {static_cast<double>(k) * fs / static_cast<double>(n), (unpaired ? 1.0 : 2.0) * std::norm(spectrum[k]) * norm};
  }
  return out;
}

inline std::vector<PsdBin> periodogram(std::span<const double> signal, double fs) {
  require(signal.size() >= 2, ErrorKind::EmptyInput, "periodogram needs at least two samples");
  return periodogram(FftPlan(signal.size()), signal, fs);
}

struct BandSpec {
  std::string name;
  double lo_hz;
  double hi_hz;
  bool hi_inclusive = false;

  bool contains(double f) const { return f >= lo_hz && (hi_inclusive ? f <= hi_hz : f < hi_hz); }
};

// Default band edges; [7,8) Hz falls between theta and alpha and is unassigned.
inline std::vector<BandSpec> default_bands() {
  return {{"delta", 0.0, 4.0},
          {"theta", 4.0, 7.0},
          {"alpha", 8.0, 12.0},
          {"beta", 12.0, 30.0},
          {"gamma", 30.0, 50.0, true}};
}

inline void validate_bands(const std::vector<BandSpec>& bands, double fs) {
  require(!bands.empty(), ErrorKind::ConfigInvalid, "no bands configured");
  for (const auto& b : bands) {
    require(b.lo_hz < b.hi_hz, ErrorKind::ConfigInvalid, "band " + b.name + " has lo >= hi");
    require(b.hi_hz <= fs / 2.0, ErrorKind::ConfigInvalid, "band " + b.name + " extends past Nyquist");
  }
}

// Mean PSD per band for every channel; output is channel-major, band order
// as given.
inline std::vector<double> band_powers(const MatrixD& epoch, double fs, const std::vector<BandSpec>& bands) {
  validate_bands(bands, fs);
  const std::size_t n = epoch.cols();
  require(n >= 2, ErrorKind::EmptyInput, "epoch too short for a periodogram");
  const FftPlan plan(n);
  std::vector<double> out;
  out.reserve(epoch.rows() * bands.size());
  for (std::size_t c = 0; c < epoch.rows(); ++c) {
    const auto psd = periodogram(plan, epoch.row(c), fs);
    for (const auto& band : bands) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& bin : psd) {
        if (band.contains(bin.freq_hz)) {
          sum += bin.psd;
          ++count;
        }
      }
      if (count == 0)
        fail(ErrorKind::EmptyBand, "band " + band.name + " contains no bins at N=" + std::to_string(n) +
                                       ", fs=" + std::to_string(fs));
      out.push_back(sum / static_cast<double>(count));
    }
  }
  return out;
}

inline std::string format_sig9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace drivattn
