#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "drivattn/recdata.hpp"
#include "oracles.hpp"

using namespace drivattn;

namespace {

Recording make_recording(std::size_t channels, std::size_t samples, double fs, std::vector<DeviationEvent> events) {
  Recording r;
  r.subject_id = 3;
  r.session = Session::KPlus;
  r.sample_rate_hz = fs;
  for (std::size_t c = 0; c < channels; ++c) r.channel_names.push_back("c" + std::to_string(c));
  r.samples = Matrix<float>(channels, samples);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t t = 0; t < samples; ++t) r.samples(c, t) = static_cast<float>(c * 10000 + t);
  r.events = std::move(events);
  return r;
}

// Recording with one event per reaction time, spaced so every window fits.
Recording recording_with_rts(const std::vector<double>& rts, double fs = 100.0, std::uint16_t subject = 1,
                             Session s = Session::KPlus) {
  std::vector<DeviationEvent> ev;
  std::uint64_t cursor = static_cast<std::uint64_t>(4 * fs);
  for (double rt : rts) {
    const auto onset = cursor;
    const auto resp = onset + static_cast<std::uint64_t>(std::llround(rt * fs));
    ev.push_back({onset, resp, resp + 10});
    cursor = resp + 10 + static_cast<std::uint64_t>(4 * fs);
  }
  auto r = make_recording(2, cursor + 1, fs, ev);
  r.subject_id = subject;
  r.session = s;
  return r;
}

}  // namespace

TEST(ReactionTimes, ZeroWhenResponseCoincides) {
  auto r = make_recording(1, 2000, 500.0, {{1000, 1000, 1200}});
  EXPECT_EQ(compute_reaction_times(r), std::vector<double>{0.0});
}

TEST(ReactionTimes, QuotientOfSampleDifference) {
  auto r = make_recording(1, 2000, 500.0, {{1000, 1750, 1800}});
  EXPECT_DOUBLE_EQ(compute_reaction_times(r)[0], 1.5);
}

TEST(ReactionTimes, MatchesPerElementOracle) {
  Rng rng(5);
  std::vector<DeviationEvent> ev;
  std::uint64_t t = 0;
  for (int i = 0; i < 100; ++i) {
    t += rng.index(500);
    const auto resp = t + rng.index(2000);
    ev.push_back({t, resp, resp + rng.index(100)});
  }
  auto r = make_recording(1, ev.back().response_offset + 1 + 3000, 250.0, ev);
  std::sort(r.events.begin(), r.events.end(),
            [](const auto& a, const auto& b) { return a.deviation_onset < b.deviation_onset; });
  const auto rts = compute_reaction_times(r);
  ASSERT_EQ(rts.size(), 100u);
  for (std::size_t i = 0; i < rts.size(); ++i)
    EXPECT_EQ(rts[i], static_cast<double>(r.events[i].response_onset - r.events[i].deviation_onset) / 250.0);
}

TEST(Percentile, SingleElement) { EXPECT_EQ(percentile_nearest_rank({5.0}, 20), 5.0); }

TEST(Percentile, SecondOrderStatisticOfTen) {
  EXPECT_EQ(percentile_nearest_rank({1.2, 0.4, 3.0, 0.5, 0.6, 0.8, 1.0, 1.5, 2.0, 2.5}, 20), 0.5);
}

TEST(Percentile, HundredIsMaximum) { EXPECT_EQ(percentile_nearest_rank({3.0, 9.0, 1.0}, 100), 9.0); }

TEST(Percentile, EmptyInputRejected) {
  try {
    percentile_nearest_rank({}, 20);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyInput);
  }
}

TEST(Labeling, WorkedExample) {
  const std::vector<double> rts{0.4, 0.5, 0.6, 0.8, 1.0, 1.2, 1.5, 2.0, 2.5, 3.0};
  using L = TrialLabel;
  const std::vector<L> expect{L::Attentive, L::Excluded, L::Excluded, L::Excluded, L::Excluded,
                              L::Excluded,  L::Excluded, L::Excluded, L::Inattentive, L::Inattentive};
  EXPECT_EQ(label_trials(rts, {}), expect);
}

TEST(Labeling, TiesAtThetaAreExcluded) {
  for (auto l : label_trials({1.0, 1.0, 1.0, 1.0}, {})) EXPECT_EQ(l, TrialLabel::Excluded);
}

TEST(Labeling, MinGuardKeepsSlowTrialsInattentive) {
  for (auto l : label_trials({3.0, 3.0, 3.0}, {})) EXPECT_EQ(l, TrialLabel::Inattentive);
}

TEST(Labeling, ExactlyAtSlowThresholdIsExcluded) {
  const auto l = label_trials({0.1, 0.2, 2.1, 2.1, 2.2}, {});
  EXPECT_EQ(l[2], TrialLabel::Excluded);
  EXPECT_EQ(l[4], TrialLabel::Inattentive);
}

TEST(Labeling, EmptyInputRejected) { EXPECT_THROW(label_trials({}, {}), Error); }

TEST(Labeling, AgreesWithBruteForceOnRandomLists) {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(200);
    std::vector<double> rts(n);
    for (auto& v : rts) v = rng.bernoulli(0.2) ? std::round(rng.uniform(0.0, 4.0) * 10) / 10 : rng.uniform(0.0, 4.0);
    LabelPolicy p;
    p.alert_percentile = trial % 3 == 0 ? 20.0 : rng.uniform(1.0, 99.0);
    ASSERT_EQ(label_trials(rts, p), oracle::brute_force_labels(rts, p.alert_percentile, p.slow_threshold_s))
        << "trial " << trial;
    ASSERT_EQ(percentile_nearest_rank(rts, p.alert_percentile), oracle::sorted_percentile(rts, p.alert_percentile));
  }
}

TEST(LabelPolicy, InvalidValuesRejected) {
  LabelPolicy p;
  p.alert_percentile = 100;
  EXPECT_THROW(validate(p), Error);
  p = {};
  p.slow_threshold_s = 0;
  EXPECT_THROW(validate(p), Error);
  p = {};
  p.window_s = -1;
  EXPECT_THROW(validate(p), Error);
}

TEST(Epoch, InclusiveWindowAt500Hz) {
  auto r = make_recording(2, 4000, 500.0, {{1500, 1600, 1700}});
  const auto e = extract_epoch(r, r.events[0], {});
  EXPECT_EQ(e.rows(), 2u);
  EXPECT_EQ(e.cols(), 1501u);
  EXPECT_EQ(e(0, 0), 0.0);
  EXPECT_EQ(e(1, 1500), 11500.0);
}

TEST(Epoch, OneSampleShortIsOutOfBounds) {
  auto r = make_recording(1, 4000, 500.0, {{1499, 1600, 1700}});
  try {
    extract_epoch(r, r.events[0], {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::WindowOutOfBounds);
  }
}

TEST(Epoch, WidthFollowsSampleRate) {
  for (double fs : {128.0, 250.0, 500.0}) {
    const auto onset = static_cast<std::uint64_t>(4 * fs);
    auto r = make_recording(1, static_cast<std::size_t>(6 * fs), fs, {{onset, onset + 1, onset + 2}});
    EXPECT_EQ(extract_epoch(r, r.events[0], {}).cols(), static_cast<std::size_t>(std::llround(3 * fs)) + 1);
  }
  EXPECT_EQ(window_length(3.0, 128.0), 385u);
}

TEST(Recording, InvariantsEnforced) {
  auto r = make_recording(2, 100, 500.0, {{10, 20, 30}});
  EXPECT_NO_THROW(validate(r));
  auto bad = r;
  bad.channel_names.pop_back();
  EXPECT_THROW(validate(bad), Error);
  bad = r;
  bad.events[0].response_offset = 100;
  EXPECT_THROW(validate(bad), Error);
  bad = r;
  bad.events = {{10, 5, 30}};
  EXPECT_THROW(validate(bad), Error);
  bad = r;
  bad.events = {{50, 60, 70}, {10, 20, 30}};
  EXPECT_THROW(validate(bad), Error);
  bad = r;
  bad.sample_rate_hz = 0;
  EXPECT_THROW(validate(bad), Error);
}

TEST(Session, ParsesAliases) {
  EXPECT_EQ(parse_session("kplus"), Session::KPlus);
  EXPECT_EQ(parse_session("K-"), Session::KMinus);
  EXPECT_THROW(parse_session("both"), Error);
}

TEST(LabeledSet, EventlessRecordingContributesNothing) {
  auto r = make_recording(1, 100, 100.0, {});
  const auto set = build_labeled_set({r}, {});
  EXPECT_TRUE(set.epochs.empty());
  EXPECT_EQ(set.skipped_recordings, 1u);
}

TEST(LabeledSet, MatchesLabelingOracle) {
  std::vector<double> rts(10, 0.4);
  rts.insert(rts.end(), 5, 3.0);
  const auto set = build_labeled_set({recording_with_rts(rts)}, {});
  const auto expect = oracle::brute_force_labels(rts, 20.0, 2.1);
  const auto n_att = static_cast<std::size_t>(std::count(expect.begin(), expect.end(), TrialLabel::Attentive));
  const auto n_in = static_cast<std::size_t>(std::count(expect.begin(), expect.end(), TrialLabel::Inattentive));
  EXPECT_EQ(set.counts.attentive, n_att);
  EXPECT_EQ(set.counts.inattentive, n_in);
  EXPECT_EQ(set.counts.attentive, 0u);  // theta = 0.4 and the rule is strict
  EXPECT_EQ(set.counts.inattentive, 5u);
  EXPECT_EQ(set.counts.excluded, 10u);
}

TEST(LabeledSet, CountsPartitionEvents) {
  Rng rng(3);
  std::vector<double> rts;
  for (int i = 0; i < 40; ++i) rts.push_back(rng.uniform(0.2, 3.5));
  auto rec = recording_with_rts(rts);
  rec.events.front().deviation_onset = 10;  // window precedes sample 0
  const auto set = build_labeled_set({rec}, {});
  const auto& c = set.counts;
  EXPECT_EQ(c.attentive + c.inattentive + c.excluded + c.out_of_bounds, rts.size());
  for (const auto& e : set.epochs) {
    EXPECT_NE(e.label, TrialLabel::Excluded);
    EXPECT_EQ(e.data.cols(), 301u);
  }
}

TEST(LabeledSet, SessionsLabeledIndependentlyOfOrder) {
  Rng rng(8);
  std::vector<double> a, b;
  for (int i = 0; i < 30; ++i) {
    a.push_back(rng.uniform(0.2, 3.5));
    b.push_back(rng.uniform(1.0, 4.0));
  }
  const auto ra = recording_with_rts(a, 100.0, 1, Session::KPlus);
  const auto rb = recording_with_rts(b, 100.0, 1, Session::KMinus);
  const auto s1 = build_labeled_set({ra, rb}, {});
  const auto s2 = build_labeled_set({rb, ra}, {});
  auto key = [](const LabeledSet& s) {
    std::set<std::tuple<int, std::size_t, int>> out;
    for (const auto& e : s.epochs) out.emplace(static_cast<int>(e.session), e.trial, static_cast<int>(e.label));
    return out;
  };
  EXPECT_EQ(key(s1), key(s2));
}

namespace {
struct Item {
  TrialLabel label;
  int id;
};
}  // namespace

TEST(Balance, DownsamplesMajority) {
  std::vector<Item> items;
  for (int i = 0; i < 10; ++i) items.push_back({TrialLabel::Attentive, i});
  for (int i = 10; i < 17; ++i) items.push_back({TrialLabel::Inattentive, i});
  const auto out = balance_classes(items, 4);
  EXPECT_EQ(out.size(), 14u);
  EXPECT_EQ(std::count_if(out.begin(), out.end(), [](auto& x) { return x.label == TrialLabel::Attentive; }), 7);
  std::set<int> ids;
  for (const auto& x : out) ids.insert(x.id);
  EXPECT_EQ(ids.size(), out.size());
  for (int i = 10; i < 17; ++i) EXPECT_TRUE(ids.count(i));
}

TEST(Balance, SameSeedSameSelection) {
  std::vector<Item> items;
  for (int i = 0; i < 50; ++i) items.push_back({i % 3 ? TrialLabel::Attentive : TrialLabel::Inattentive, i});
  auto ids = [](const std::vector<Item>& v) {
    std::vector<int> o;
    for (auto& x : v) o.push_back(x.id);
    return o;
  };
  EXPECT_EQ(ids(balance_classes(items, 9)), ids(balance_classes(items, 9)));
  EXPECT_NE(ids(balance_classes(items, 9)), ids(balance_classes(items, 10)));
}

TEST(Balance, AlreadyBalancedUnchanged) {
  std::vector<Item> items;
  for (int i = 0; i < 8; ++i) items.push_back({i % 2 ? TrialLabel::Attentive : TrialLabel::Inattentive, i});
  const auto out = balance_classes(items, 1);
  ASSERT_EQ(out.size(), items.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].id, items[i].id);
}

TEST(Balance, SingleClassRejected) {
  std::vector<Item> items{{TrialLabel::Attentive, 0}, {TrialLabel::Attentive, 1}};
  try {
    balance_classes(items, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingleClassInput);
  }
}

TEST(Balance, RandomInputsKeepInvariants) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Item> items;
    const int n = 2 + static_cast<int>(rng.index(80));
    for (int i = 0; i < n; ++i) items.push_back({rng.bernoulli(0.5) ? TrialLabel::Attentive : TrialLabel::Inattentive, i});
    items[0].label = TrialLabel::Attentive;
    items[1].label = TrialLabel::Inattentive;
    const auto out = balance_classes(items, rng.next_u64());
    const auto att = std::count_if(out.begin(), out.end(), [](auto& x) { return x.label == TrialLabel::Attentive; });
    EXPECT_EQ(static_cast<std::size_t>(att) * 2, out.size());
    std::set<int> ids;
    for (auto& x : out) ids.insert(x.id);
    EXPECT_EQ(ids.size(), out.size());
  }
}
