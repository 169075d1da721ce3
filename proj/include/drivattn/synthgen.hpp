#pragma once

// Seeded synthetic driving sessions. Each trial draws a latent state (alert or
// drowsy); drowsy trials get slow reaction times and, in the pre-deviation
// window, added 10 Hz and 5 Hz tones on the posterior channels.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "drivattn/error.hpp"
#include "drivattn/random.hpp"
#include "drivattn/recdata.hpp"
#include "drivattn/spectral.hpp"

namespace drivattn {

struct RtParams {
  double fast_median_s = 0.7;
  double fast_sigma = 0.25;  // log-space
  double slow_median_s = 2.8;
  double slow_sigma = 0.2;
};

struct SynthConfig {
  std::size_t n_subjects = 14;
  std::size_t trials_per_session = 60;
  double sample_rate_hz = 500.0;
  std::size_t n_channels = 30;
  double effect_size = 1.0;
  RtParams rt;
  std::vector<std::size_t> posterior_channels;  // empty -> last 8 channels
  double noise_uv = 10.0;                       // broadband noise std, K- sessions
  double kplus_noise_factor = 1.2;
  double band_lo_hz = 1.0;
  double band_hi_hz = 50.0;
  double window_s = 3.0;
  std::uint64_t seed = 1;

  std::vector<std::size_t> resolved_posterior() const {
    if (!posterior_channels.empty()) return posterior_channels;
    std::vector<std::size_t> out;
    for (std::size_t c = n_channels > 8 ? n_channels - 8 : 0; c < n_channels; ++c) out.push_back(c);
    return out;
  }
};

inline void validate(const SynthConfig& c) {
  require(c.n_subjects >= 1 && c.n_subjects <= UINT16_MAX, ErrorKind::ConfigInvalid, "n_subjects out of range");
  require(c.trials_per_session >= 5, ErrorKind::ConfigInvalid, "trials_per_session must be at least 5");
  require(c.n_channels >= 1, ErrorKind::ConfigInvalid, "n_channels must be positive");
  require(c.effect_size >= 0.0, ErrorKind::ConfigInvalid, "effect_size must be non-negative");
  require(c.sample_rate_hz > 2.0 * c.band_hi_hz, ErrorKind::ConfigInvalid, "sample rate must exceed twice the band edge");
  require(c.band_lo_hz >= 0.0 && c.band_lo_hz < c.band_hi_hz, ErrorKind::ConfigInvalid, "invalid noise band");
  require(c.noise_uv > 0.0 && c.kplus_noise_factor > 0.0, ErrorKind::ConfigInvalid, "noise levels must be positive");
  require(c.window_s > 0.0, ErrorKind::ConfigInvalid, "window_s must be positive");
  require(c.rt.fast_median_s > 0.0 && c.rt.slow_median_s > 0.0 && c.rt.fast_sigma >= 0.0 && c.rt.slow_sigma >= 0.0,
          ErrorKind::ConfigInvalid, "invalid reaction-time parameters");
  for (auto ch : c.posterior_channels)
    require(ch < c.n_channels, ErrorKind::ConfigInvalid, "posterior channel " + std::to_string(ch) + " out of range");
}

enum class LatentState : std::uint8_t { Alert, Drowsy };

inline std::string_view to_string(LatentState s) { return s == LatentState::Alert ? "alert" : "drowsy"; }

struct TrialTruth {
  std::uint16_t subject = 0;
  Session session = Session::KMinus;
  std::size_t trial = 0;
  LatentState state = LatentState::Alert;
  double rt_s = 0.0;
};

using GroundTruth = std::vector<TrialTruth>;

struct SynthDataset {
  std::vector<Recording> recordings;
  GroundTruth truth;
};

inline std::vector<std::string> default_channel_names(std::size_t n) {
  static const char* kNames[] = {"FP1", "FP2", "F7",  "F3",  "FZ", "F4",  "F8",  "FT7", "FC3", "FCZ",
                                 "FC4", "FT8", "T3",  "C3",  "CZ", "C4",  "T4",  "TP7", "CP3", "CPZ",
                                 "CP4", "TP8", "T5",  "P3",  "PZ", "P4",  "T6",  "O1",  "OZ",  "O2"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(i < 30 && n == 30 ? kNames[i] : "ch" + std::to_string(i));
  return out;
}

// Band-limited noise of the requested std: white noise shaped in the frequency
// domain (gain zero outside [lo, hi], gentle 1/f^0.05 amplitude tilt inside).
inline std::vector<float> band_limited_noise(Rng& rng, std::size_t n, double fs, double lo, double hi, double std_uv) {
  const std::size_t len = detail::next_pow2(std::max<std::size_t>(n, 2));
  FftPlan plan(len);
  std::vector<cplx> x(len);
  for (auto& v : x) v = rng.normal();
  auto spec = plan.forward(std::span<const cplx>(x));
  double gain_energy = 0.0;
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t kk = k <= len / 2 ? k : len - k;
    const double f = static_cast<double>(kk) * fs / static_cast<double>(len);
    const double g = (f >= lo && f <= hi && f > 0.0) ? std::pow(f, -0.05) : 0.0;
    spec[k] *= g;
    gain_energy += g * g;
  }
  const auto shaped = plan.inverse(spec);
  // White noise of unit variance filtered by g has variance sum(g^2)/len.
  const double scale = gain_energy > 0.0 ? std_uv / std::sqrt(gain_energy / static_cast<double>(len)) : 0.0;
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(shaped[i].real() * scale);
  return out;
}

inline std::uint64_t recording_seed(std::uint64_t master, std::uint16_t subject, Session session) {
  return derive_seed(master, (static_cast<std::uint64_t>(subject) << 1) | static_cast<std::uint64_t>(session));
}

inline double subject_noise_scale(const SynthConfig& cfg, std::uint16_t subject) {
  Rng rng(derive_seed(cfg.seed, 0x5b0000ULL + subject));
  return rng.uniform(0.8, 1.25);
}

// One subject-session recording plus its ground truth rows.
inline std::pair<Recording, GroundTruth> generate_recording(const SynthConfig& cfg, std::uint16_t subject,
                                                            Session session) {
  validate(cfg);
  Rng rng(recording_seed(cfg.seed, subject, session));
  const double fs = cfg.sample_rate_hz;
  const std::size_t w = window_offset(cfg.window_s, fs);
  auto secs = [&](double s) { return static_cast<std::uint64_t>(std::llround(s * fs)); };

  Recording rec;
  rec.subject_id = subject;
  rec.session = session;
  rec.sample_rate_hz = fs;
  rec.channel_names = default_channel_names(cfg.n_channels);
  GroundTruth truth;

  std::uint64_t cursor = w + secs(1.0);
  for (std::size_t t = 0; t < cfg.trials_per_session; ++t) {
    const LatentState state = rng.bernoulli(0.5) ? LatentState::Drowsy : LatentState::Alert;
    const bool slow = state == LatentState::Drowsy;
    const double median = slow ? cfg.rt.slow_median_s : cfg.rt.fast_median_s;
    const double sigma = slow ? cfg.rt.slow_sigma : cfg.rt.fast_sigma;
    const double rt = median * std::exp(sigma * rng.normal());
    DeviationEvent e;
    e.deviation_onset = cursor + secs(rng.uniform(0.0, 1.0));
    e.response_onset = e.deviation_onset + secs(rt);
    e.response_offset = e.response_onset + secs(rng.uniform(0.5, 1.0));
    rec.events.push_back(e);
    truth.push_back({subject, session, t, state, static_cast<double>(e.response_onset - e.deviation_onset) / fs});
    // The next pre-deviation window starts after this response has ended.
    cursor = e.response_offset + w + secs(0.2);
  }
  const std::size_t n = static_cast<std::size_t>(rec.events.back().response_offset + secs(1.0));

  const double noise_std =
      cfg.noise_uv * subject_noise_scale(cfg, subject) * (session == Session::KPlus ? cfg.kplus_noise_factor : 1.0);
  rec.samples = Matrix<float>(cfg.n_channels, n);
  for (std::size_t c = 0; c < cfg.n_channels; ++c) {
    const auto noise = band_limited_noise(rng, n, fs, cfg.band_lo_hz, cfg.band_hi_hz, noise_std);
    std::copy(noise.begin(), noise.end(), rec.samples.row(c).begin());
  }

  const double amp = cfg.effect_size * noise_std;
  if (amp > 0.0) {
    const auto posterior = cfg.resolved_posterior();
    for (std::size_t t = 0; t < truth.size(); ++t) {
      if (truth[t].state != LatentState::Drowsy) continue;
      const std::size_t onset = rec.events[t].deviation_onset;
      for (auto ch : posterior) {
        const double ph_alpha = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double ph_theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        auto row = rec.samples.row(ch);
        for (std::size_t i = onset - w; i <= onset; ++i) {
          const double tt = static_cast<double>(i) / fs;
          const double tone = std::sin(2.0 * std::numbers::pi * 10.0 * tt + ph_alpha) +
                              std::sin(2.0 * std::numbers::pi * 5.0 * tt + ph_theta);
          row[i] = static_cast<float>(static_cast<double>(row[i]) + amp * tone);
        }
      }
    }
  }
  validate(rec);
  return {std::move(rec), std::move(truth)};
}

// Subjects are numbered 1..n_subjects; each gets a K+ and a K- session.
inline SynthDataset generate_dataset(const SynthConfig& cfg) {
  validate(cfg);
  SynthDataset ds;
  for (std::size_t s = 1; s <= cfg.n_subjects; ++s)
    for (Session sess : {Session::KPlus, Session::KMinus}) {
      auto [rec, truth] = generate_recording(cfg, static_cast<std::uint16_t>(s), sess);
      ds.recordings.push_back(std::move(rec));
      ds.truth.insert(ds.truth.end(), truth.begin(), truth.end());
    }
  return ds;
}

inline std::string ground_truth_csv(const GroundTruth& gt) {
  std::ostringstream out;
  out << "subject,session,trial,latent_state,rt_s\n";
  for (const auto& t : gt)
    out << t.subject << ',' << to_string(t.session) << ',' << t.trial << ',' << to_string(t.state) << ','
        << format_sig9(t.rt_s) << '\n';
  return out.str();
}

struct LabelAgreement {
  double agreement = 0.0;  // fraction of non-excluded trials whose label matches the latent state
  std::size_t n_labeled = 0;
  std::size_t n_agree = 0;
};

// Compares RT-threshold labels (computed from `rts` under `policy`) with the
// generated latent states: attentive <-> alert, inattentive <-> drowsy.
inline LabelAgreement oracle_labels(const GroundTruth& gt, const LabelPolicy& policy, const std::vector<double>& rts) {
  require(!gt.empty() && gt.size() == rts.size(), ErrorKind::LengthMismatch,
          "ground truth and reaction times must be non-empty and aligned");
  const auto labels = label_trials(rts, policy);
  LabelAgreement a;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == TrialLabel::Excluded) continue;
    ++a.n_labeled;
    const bool match = (labels[i] == TrialLabel::Attentive) == (gt[i].state == LatentState::Alert);
    a.n_agree += match;
  }
  a.agreement = a.n_labeled ? static_cast<double>(a.n_agree) / static_cast<double>(a.n_labeled) : 0.0;
  return a;
}

}  // namespace drivattn
