#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "drivattn/atdr.hpp"
#include "drivattn/synthgen.hpp"

using namespace drivattn;

namespace {

SynthConfig small_config(double effect, std::uint64_t seed = 11) {
  SynthConfig c;
  c.n_subjects = 2;
  c.trials_per_session = 30;
  c.sample_rate_hz = 128.0;
  c.n_channels = 6;
  c.effect_size = effect;
  c.seed = seed;
  return c;
}

struct ClassPower {
  double drowsy = 0.0;
  double alert = 0.0;
  std::size_t n_drowsy = 0;
  std::size_t n_alert = 0;

  double ratio() const { return (drowsy / n_drowsy) / (alert / n_alert); }
};

// Mean band power of the given channels over pre-deviation windows, split by
// the latent state.
ClassPower class_power(const SynthDataset& ds, const std::vector<std::size_t>& channels, std::size_t band) {
  const auto bands = default_bands();
  LabelPolicy policy;
  ClassPower out;
  std::size_t t = 0;
  for (const auto& rec : ds.recordings) {
    for (const auto& e : rec.events) {
      const auto& truth = ds.truth.at(t++);
      const auto bp = band_powers(extract_epoch(rec, e, policy), rec.sample_rate_hz, bands);
      double p = 0.0;
      for (auto c : channels) p += bp[c * bands.size() + band];
      if (truth.state == LatentState::Drowsy) {
        out.drowsy += p;
        ++out.n_drowsy;
      } else {
        out.alert += p;
        ++out.n_alert;
      }
    }
  }
  return out;
}

constexpr std::size_t kTheta = 1, kAlpha = 2;

template <class F>
void expect_error_kind(F&& f, ErrorKind kind) {
  try {
    f();
    ADD_FAILURE() << "no exception";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

}  // namespace

TEST(Synthgen, SameSeedGivesIdenticalBytes) {
  const auto cfg = small_config(1.0);
  const auto a = generate_dataset(cfg);
  const auto b = generate_dataset(cfg);
  ASSERT_EQ(a.recordings.size(), b.recordings.size());
  for (std::size_t i = 0; i < a.recordings.size(); ++i)
    EXPECT_EQ(encode_atdr(a.recordings[i]), encode_atdr(b.recordings[i]));
  EXPECT_EQ(ground_truth_csv(a.truth), ground_truth_csv(b.truth));

  const auto c = generate_dataset(small_config(1.0, 12));
  EXPECT_NE(encode_atdr(a.recordings[0]), encode_atdr(c.recordings[0]));
}

TEST(Synthgen, RecordingsAreValidAndRoundTrip) {
  const auto ds = generate_dataset(small_config(2.0));
  const auto dir = std::filesystem::temp_directory_path() / "drivattn_synth_rt";
  std::filesystem::create_directories(dir);
  for (const auto& rec : ds.recordings) {
    EXPECT_NO_THROW(validate(rec));
    EXPECT_EQ(decode_atdr(encode_atdr(rec)), rec);
    const auto path = dir / ("s" + std::to_string(rec.subject_id) + std::string(to_string(rec.session)) + ".atdr");
    write_atdr(path, rec);
    EXPECT_EQ(read_atdr(path), rec);
  }
  std::filesystem::remove_all(dir);
}

TEST(Synthgen, LayoutAndGroundTruth) {
  const auto cfg = small_config(1.0);
  const auto ds = generate_dataset(cfg);
  ASSERT_EQ(ds.recordings.size(), 2 * cfg.n_subjects);
  ASSERT_EQ(ds.truth.size(), 2 * cfg.n_subjects * cfg.trials_per_session);
  const std::size_t w = window_offset(cfg.window_s, cfg.sample_rate_hz);

  std::size_t t = 0;
  std::size_t drowsy = 0;
  for (std::size_t r = 0; r < ds.recordings.size(); ++r) {
    const auto& rec = ds.recordings[r];
    EXPECT_EQ(rec.subject_id, r / 2 + 1);
    EXPECT_EQ(rec.session, r % 2 == 0 ? Session::KPlus : Session::KMinus);
    EXPECT_EQ(rec.n_channels(), cfg.n_channels);
    ASSERT_EQ(rec.events.size(), cfg.trials_per_session);
    const auto rts = compute_reaction_times(rec);
    for (std::size_t i = 0; i < rec.events.size(); ++i, ++t) {
      const auto& gt = ds.truth[t];
      EXPECT_EQ(gt.subject, rec.subject_id);
      EXPECT_EQ(gt.session, rec.session);
      EXPECT_EQ(gt.trial, i);
      EXPECT_DOUBLE_EQ(gt.rt_s, rts[i]);
      drowsy += gt.state == LatentState::Drowsy;
      // Each pre-deviation window starts after the previous response ended.
      ASSERT_GE(rec.events[i].deviation_onset, w);
      if (i > 0) {
        EXPECT_GT(rec.events[i].deviation_onset - w, rec.events[i - 1].response_offset);
      }
    }
    EXPECT_LT(rec.events.back().response_offset, rec.n_samples());
  }
  EXPECT_GT(drowsy, ds.truth.size() / 4);
  EXPECT_LT(drowsy, 3 * ds.truth.size() / 4);
}

TEST(Synthgen, GroundTruthCsv) {
  const auto ds = generate_dataset(small_config(1.0));
  const auto csv = ground_truth_csv(ds.truth);
  EXPECT_EQ(csv.rfind("subject,session,trial,latent_state,rt_s\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), ds.truth.size() + 1);
  EXPECT_NE(csv.find("1,kplus,0,"), std::string::npos);
}

TEST(Synthgen, ZeroEffectLeavesAlphaUnchanged) {
  auto cfg = small_config(0.0, 5);
  cfg.n_subjects = 4;
  cfg.trials_per_session = 40;
  const auto ds = generate_dataset(cfg);
  const auto cp = class_power(ds, cfg.resolved_posterior(), kAlpha);
  ASSERT_GE(cp.n_drowsy + cp.n_alert, 200u);
  EXPECT_LT(std::abs(cp.ratio() - 1.0), 0.05) << cp.ratio();
}

TEST(Synthgen, LargeEffectRaisesPosteriorAlpha) {
  auto cfg = small_config(3.0, 6);
  cfg.n_subjects = 4;
  cfg.trials_per_session = 40;
  cfg.posterior_channels = {3, 4, 5};
  const auto ds = generate_dataset(cfg);
  const auto posterior = class_power(ds, cfg.posterior_channels, kAlpha);
  EXPECT_GE(posterior.ratio(), 2.0);
  EXPECT_GE(class_power(ds, cfg.posterior_channels, kTheta).ratio(), 2.0);
  // Channels outside the posterior set carry no injected signal.
  EXPECT_LT(std::abs(class_power(ds, {0, 1, 2}, kAlpha).ratio() - 1.0), 0.1);
}

TEST(Synthgen, TonesLandInAlphaAndTheta) {
  auto cfg = small_config(3.0, 7);
  cfg.posterior_channels = {5};
  const auto ds = generate_dataset(cfg);
  LabelPolicy policy;
  const double fs = cfg.sample_rate_hz;
  std::vector<double> drowsy, alert;
  std::vector<double> freqs;
  std::size_t t = 0;
  for (const auto& rec : ds.recordings)
    for (const auto& e : rec.events) {
      const auto epoch = extract_epoch(rec, e, policy);
      const auto psd = periodogram(epoch.row(5), fs);
      auto& acc = ds.truth[t++].state == LatentState::Drowsy ? drowsy : alert;
      if (acc.empty()) acc.assign(psd.size(), 0.0);
      if (freqs.empty())
        for (const auto& b : psd) freqs.push_back(b.freq_hz);
      for (std::size_t k = 0; k < psd.size(); ++k) acc[k] += psd[k].psd;
    }
  std::vector<double> excess(freqs.size());
  for (std::size_t k = 0; k < freqs.size(); ++k) excess[k] = drowsy[k] - alert[k];

  const auto bands = default_bands();
  const std::size_t top = std::max_element(excess.begin(), excess.end()) - excess.begin();
  EXPECT_TRUE(bands[kAlpha].contains(freqs[top]) || bands[kTheta].contains(freqs[top])) << freqs[top];
  std::size_t top_alpha = 0, top_theta = 0;
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    if (bands[kAlpha].contains(freqs[k]) && excess[k] > excess[top_alpha]) top_alpha = k;
    if (bands[kTheta].contains(freqs[k]) && excess[k] > excess[top_theta]) top_theta = k;
  }
  EXPECT_NEAR(freqs[top_alpha], 10.0, 0.5);
  EXPECT_NEAR(freqs[top_theta], 5.0, 0.5);
  // Outside the two tones the drowsy excess is small next to the peaks.
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    if (std::abs(freqs[k] - 10.0) > 2.0 && std::abs(freqs[k] - 5.0) > 2.0) {
      EXPECT_LT(excess[k], 0.1 * excess[top_theta]) << freqs[k];
    }
  }
}

TEST(Synthgen, KPlusSessionsAreNoisier) {
  const auto ds = generate_dataset(small_config(0.0, 8));
  for (std::size_t s = 0; s < 2; ++s) {
    auto power = [](const Recording& r) {
      double acc = 0.0;
      for (float v : r.samples.row(0)) acc += static_cast<double>(v) * v;
      return acc / static_cast<double>(r.n_samples());
    };
    const double ratio = power(ds.recordings[2 * s]) / power(ds.recordings[2 * s + 1]);
    EXPECT_NEAR(ratio, 1.44, 0.15);
  }
}

TEST(Synthgen, NoiseHasRequestedStd) {
  Rng rng(3);
  const auto x = band_limited_noise(rng, 1 << 14, 128.0, 1.0, 50.0, 10.0);
  double ss = 0.0;
  for (float v : x) ss += static_cast<double>(v) * v;
  EXPECT_NEAR(std::sqrt(ss / x.size()), 10.0, 0.3);
}

TEST(Synthgen, NoiseSpectrumIsFlatAndBandLimited) {
  const double fs = 128.0;
  const std::size_t n = 256;
  const std::size_t reps = 400;
  Rng rng(21);
  std::vector<double> mean(n / 2 + 1, 0.0);
  std::vector<double> freqs;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto x = band_limited_noise(rng, n, fs, 1.0, 50.0, 1.0);
    const std::vector<double> xd(x.begin(), x.end());
    const auto psd = periodogram(xd, fs);
    if (freqs.empty())
      for (const auto& b : psd) freqs.push_back(b.freq_hz);
    for (std::size_t k = 0; k < psd.size(); ++k) mean[k] += psd[k].psd / reps;
  }
  // Judge flatness on 2 Hz groups so the check is about the shape, not the
  // sampling scatter of single bins.
  std::vector<double> groups;
  for (double lo = 1.0; lo < 50.0; lo += 2.0) {
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t k = 0; k < freqs.size(); ++k)
      if (freqs[k] >= lo && freqs[k] < std::min(lo + 2.0, 50.0)) s += mean[k], ++c;
    groups.push_back(s / c);
  }
  const auto [lo_it, hi_it] = std::minmax_element(groups.begin(), groups.end());
  EXPECT_LT(*hi_it / *lo_it, 2.0);
  const double level = std::accumulate(groups.begin(), groups.end(), 0.0) / groups.size();
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    if (freqs[k] < 1.0 || freqs[k] > 50.0) {
      EXPECT_LE(mean[k], 0.01 * level) << freqs[k];
    }
  }
}

TEST(Synthgen, NoiseLeakageInTruncatedWindows) {
  // Windows that are not a power of two see the band edge through spectral
  // leakage; a few hertz away from the edge it is below one percent.
  auto cfg = small_config(0.0, 9);
  const auto ds = generate_dataset(cfg);
  LabelPolicy policy;
  std::vector<double> mean;
  std::vector<double> freqs;
  std::size_t count = 0;
  for (const auto& rec : ds.recordings)
    for (const auto& e : rec.events) {
      const auto epoch = extract_epoch(rec, e, policy);
      for (std::size_t c = 0; c < epoch.rows(); ++c) {
        const auto psd = periodogram(epoch.row(c), rec.sample_rate_hz);
        if (mean.empty()) {
          mean.assign(psd.size(), 0.0);
          for (const auto& b : psd) freqs.push_back(b.freq_hz);
        }
        for (std::size_t k = 0; k < psd.size(); ++k) mean[k] += psd[k].psd;
        ++count;
      }
    }
  double level = 0.0;
  std::size_t in = 0;
  for (std::size_t k = 0; k < freqs.size(); ++k)
    if (freqs[k] >= 5.0 && freqs[k] <= 45.0) level += mean[k], ++in;
  level /= in;
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    if (freqs[k] >= 55.0) {
      EXPECT_LE(mean[k], 0.01 * level) << freqs[k];
    }
  }
}

TEST(Synthgen, OracleLabelsSeparatedModes) {
  auto cfg = small_config(0.0);
  cfg.rt.fast_sigma = 0.0;
  cfg.rt.slow_sigma = 0.0;
  const auto ds = generate_dataset(cfg);
  LabelPolicy policy;
  std::size_t t = 0;
  for (const auto& rec : ds.recordings) {
    const GroundTruth gt(ds.truth.begin() + t, ds.truth.begin() + t + rec.events.size());
    t += rec.events.size();
    const auto a = oracle_labels(gt, policy, compute_reaction_times(rec));
    EXPECT_GT(a.n_labeled, 0u);
    EXPECT_DOUBLE_EQ(a.agreement, 1.0);
  }
}

TEST(Synthgen, OracleLabelsMatchDirectCount) {
  auto cfg = small_config(0.0, 4);
  cfg.rt.fast_median_s = 1.4;
  cfg.rt.fast_sigma = 0.5;
  cfg.rt.slow_median_s = 2.0;
  cfg.rt.slow_sigma = 0.4;
  const auto ds = generate_dataset(cfg);
  LabelPolicy policy;
  std::vector<double> rts;
  for (const auto& rec : ds.recordings) {
    const auto r = compute_reaction_times(rec);
    rts.insert(rts.end(), r.begin(), r.end());
  }
  const auto a = oracle_labels(ds.truth, policy, rts);

  const double theta = std::min(percentile_nearest_rank(rts, policy.alert_percentile), policy.slow_threshold_s);
  std::size_t labeled = 0, agree = 0;
  for (std::size_t i = 0; i < rts.size(); ++i) {
    const bool attentive = rts[i] < theta;
    const bool inattentive = rts[i] > policy.slow_threshold_s;
    if (!attentive && !inattentive) continue;
    ++labeled;
    agree += attentive == (ds.truth[i].state == LatentState::Alert);
  }
  EXPECT_EQ(a.n_labeled, labeled);
  EXPECT_EQ(a.n_agree, agree);
  EXPECT_LT(a.agreement, 1.0);
}

TEST(Synthgen, OracleLabelsGuards) {
  LabelPolicy policy;
  expect_error_kind([&] { oracle_labels({}, policy, {}); }, ErrorKind::LengthMismatch);
  GroundTruth gt(3);
  expect_error_kind([&] { oracle_labels(gt, policy, {1.0, 2.0}); }, ErrorKind::LengthMismatch);
}

TEST(Synthgen, ConfigValidation) {
  auto bad = [](auto mutate) {
    auto c = small_config(1.0);
    mutate(c);
    return c;
  };
  const std::vector<SynthConfig> cases = {
      bad([](SynthConfig& c) { c.effect_size = -0.1; }),
      bad([](SynthConfig& c) { c.trials_per_session = 4; }),
      bad([](SynthConfig& c) { c.posterior_channels = {6}; }),
      bad([](SynthConfig& c) { c.n_subjects = 0; }),
      bad([](SynthConfig& c) { c.sample_rate_hz = 100.0; }),
      bad([](SynthConfig& c) { c.noise_uv = 0.0; }),
  };
  for (const auto& c : cases) expect_error_kind([&] { generate_dataset(c); }, ErrorKind::ConfigInvalid);
}
