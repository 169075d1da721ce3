#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "drivattn/error.hpp"
#include "drivattn/matrix.hpp"
#include "drivattn/random.hpp"

namespace drivattn {

enum class Session : std::uint8_t { KMinus = 0, KPlus = 1 };

inline std::string_view to_string(Session s) { return s == Session::KPlus ? "kplus" : "kminus"; }

inline Session parse_session(std::string_view s) {
  if (s == "kplus" || s == "K+" || s == "1") return Session::KPlus;
  if (s == "kminus" || s == "K-" || s == "0") return Session::KMinus;
  fail(ErrorKind::Format, "unknown session '" + std::string(s) + "'");
}

struct DeviationEvent {
  std::uint64_t deviation_onset = 0;
  std::uint64_t response_onset = 0;
  std::uint64_t response_offset = 0;

  bool operator==(const DeviationEvent&) const = default;
};

// One subject-session: multichannel EEG (channel-major, microvolts) plus the
// lane-deviation event markers.
struct Recording {
  std::uint16_t subject_id = 0;
  Session session = Session::KMinus;
  double sample_rate_hz = 500.0;
  std::vector<std::string> channel_names;
  Matrix<float> samples;
  std::vector<DeviationEvent> events;

  std::size_t n_channels() const { return samples.rows(); }
  std::size_t n_samples() const { return samples.cols(); }

  bool operator==(const Recording&) const = default;
};

inline void validate(const Recording& rec) {
  require(rec.sample_rate_hz > 0.0 && std::isfinite(rec.sample_rate_hz), ErrorKind::Format,
          "sample rate must be positive");
  require(rec.channel_names.size() == rec.n_channels(), ErrorKind::Format,
          "channel name count does not match sample matrix rows");
  for (std::size_t i = 0; i < rec.events.size(); ++i) {
    const auto& e = rec.events[i];
    require(e.deviation_onset <= e.response_onset && e.response_onset <= e.response_offset, ErrorKind::Format,
            "event " + std::to_string(i) + " is not ordered deviation <= response onset <= response offset");
    require(e.response_offset < rec.n_samples(), ErrorKind::Format,
            "event " + std::to_string(i) + " indexes past the end of the recording");
    if (i > 0)
      require(rec.events[i - 1].deviation_onset <= e.deviation_onset, ErrorKind::Format,
              "events are not sorted by deviation onset");
  }
}

struct LabelPolicy {
  double alert_percentile = 20.0;
  double slow_threshold_s = 2.1;
  double window_s = 3.0;
};

inline void validate(const LabelPolicy& p) {
  require(p.alert_percentile > 0.0 && p.alert_percentile < 100.0, ErrorKind::ConfigInvalid,
          "alert_percentile must lie in (0,100)");
  require(p.slow_threshold_s > 0.0, ErrorKind::ConfigInvalid, "slow_threshold_s must be positive");
  require(p.window_s > 0.0, ErrorKind::ConfigInvalid, "window_s must be positive");
}

enum class TrialLabel : std::uint8_t { Attentive, Inattentive, Excluded };

inline std::string_view to_string(TrialLabel l) {
  switch (l) {
    case TrialLabel::Attentive: return "attentive";
    case TrialLabel::Inattentive: return "inattentive";
    case TrialLabel::Excluded: return "excluded";
  }
  return "?";
}

// Binary target used by every classifier: inattentive is the positive class.
inline int to_binary(TrialLabel l) { return l == TrialLabel::Inattentive ? 1 : 0; }

struct LabeledEpoch {
  std::uint16_t subject_id = 0;
  Session session = Session::KMinus;
  TrialLabel label = TrialLabel::Attentive;
  std::size_t trial = 0;
  double rt_s = 0.0;
  MatrixD data;  // n_channels x window_len
};

inline std::vector<double> compute_reaction_times(const Recording& rec) {
  std::vector<double> rts;
  rts.reserve(rec.events.size());
  for (const auto& e : rec.events)
    rts.push_back(static_cast<double>(e.response_onset - e.deviation_onset) / rec.sample_rate_hz);
  return rts;
}

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value (1-indexed).
inline double percentile_nearest_rank(std::vector<double> values, double p) {
  require(!values.empty(), ErrorKind::EmptyInput, "percentile of an empty list");
  require(p > 0.0 && p <= 100.0, ErrorKind::ConfigInvalid, "percentile must lie in (0,100]");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

// Thresholds are computed from `rts` alone, so callers pass one session at a time.
inline std::vector<TrialLabel> label_trials(const std::vector<double>& rts, const LabelPolicy& policy) {
  require(!rts.empty(), ErrorKind::EmptyInput, "no reaction times to label");
  validate(policy);
  const double theta = percentile_nearest_rank(rts, policy.alert_percentile);
  const double fast_cut = std::min(theta, policy.slow_threshold_s);
  std::vector<TrialLabel> out;
  out.reserve(rts.size());
  for (double rt : rts) {
    if (rt < fast_cut)
      out.push_back(TrialLabel::Attentive);
    else if (rt > policy.slow_threshold_s)
      out.push_back(TrialLabel::Inattentive);
    else
      out.push_back(TrialLabel::Excluded);
  }
  return out;
}

inline std::size_t window_offset(double window_s, double fs) {
  return static_cast<std::size_t>(std::llround(window_s * fs));
}

inline std::size_t window_length(double window_s, double fs) { return window_offset(window_s, fs) + 1; }

// Samples [onset - W, onset] inclusive on every channel.
inline MatrixD extract_epoch(const Recording& rec, const DeviationEvent& event, const LabelPolicy& policy) {
  const std::size_t w = window_offset(policy.window_s, rec.sample_rate_hz);
  if (event.deviation_onset < w || event.deviation_onset >= rec.n_samples())
    fail(ErrorKind::WindowOutOfBounds, "window for onset " + std::to_string(event.deviation_onset) +
                                           " needs " + std::to_string(w) + " preceding samples");
  const std::size_t start = event.deviation_onset - w;
  MatrixD out(rec.n_channels(), w + 1);
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    auto src = rec.samples.row(c);
    auto dst = out.row(c);
    for (std::size_t t = 0; t <= w; ++t) dst[t] = static_cast<double>(src[start + t]);
  }
  return out;
}

struct LabelCounts {
  std::size_t attentive = 0;
  std::size_t inattentive = 0;
  std::size_t excluded = 0;
  std::size_t out_of_bounds = 0;
};

struct LabeledSet {
  std::vector<LabeledEpoch> epochs;
  LabelCounts counts;
  std::size_t skipped_recordings = 0;  // recordings without events
};

inline LabeledSet build_labeled_set(const std::vector<Recording>& recordings, const LabelPolicy& policy) {
  validate(policy);
  LabeledSet set;
  for (const auto& rec : recordings) {
    validate(rec);
    if (rec.events.empty()) {
      ++set.skipped_recordings;
      continue;
    }
    const auto labels = label_trials(compute_reaction_times(rec), policy);
    const auto rts = compute_reaction_times(rec);
    for (std::size_t i = 0; i < rec.events.size(); ++i) {
      if (labels[i] == TrialLabel::Excluded) {
        ++set.counts.excluded;
        continue;
      }
      MatrixD data;
      try {
        data = extract_epoch(rec, rec.events[i], policy);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::WindowOutOfBounds) throw;
        ++set.counts.out_of_bounds;
        continue;
      }
      (labels[i] == TrialLabel::Attentive ? set.counts.attentive : set.counts.inattentive)++;
      set.epochs.push_back({rec.subject_id, rec.session, labels[i], i, rts[i], std::move(data)});
    }
  }
  return set;
}

// Uniformly downsamples the majority class to the minority count. Works on
// any element type exposing a `label` member.
template <class Item>
std::vector<Item> balance_classes(const std::vector<Item>& items, std::uint64_t seed) {
  std::vector<std::size_t> att, inatt;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].label == TrialLabel::Attentive)
      att.push_back(i);
    else if (items[i].label == TrialLabel::Inattentive)
      inatt.push_back(i);
  }
  require(!att.empty() && !inatt.empty(), ErrorKind::SingleClassInput,
          "balancing needs both classes (attentive=" + std::to_string(att.size()) +
              ", inattentive=" + std::to_string(inatt.size()) + ")");
  auto& majority = att.size() > inatt.size() ? att : inatt;
  const std::size_t keep = std::min(att.size(), inatt.size());
  Rng rng(seed);
  rng.shuffle(majority);
  majority.resize(keep);
  std::sort(majority.begin(), majority.end());

  std::vector<std::size_t> chosen;
  chosen.reserve(2 * keep);
  std::merge(att.begin(), att.end(), inatt.begin(), inatt.end(), std::back_inserter(chosen));
  std::vector<Item> out;
  out.reserve(chosen.size());
  for (auto i : chosen) out.push_back(items[i]);
  return out;
}

}  // namespace drivattn
