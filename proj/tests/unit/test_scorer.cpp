#include <gtest/gtest.h>

#include <random>

#include "msdiar/scorer.hpp"
#include "oracles.hpp"

using namespace msdiar;

namespace {

std::vector<RttmTurn> random_reference(std::mt19937_64& rng, int speakers, bool overlap) {
  std::vector<RttmTurn> turns;
  Millis t = 0;
  for (int k = 0; k < 12; ++k) {
    const Millis d = std::uniform_int_distribution<Millis>(200, 3000)(rng);
    turns.push_back({"r", t, d, "S" + std::to_string(k % speakers)});
    t += d + std::uniform_int_distribution<Millis>(0, 800)(rng);
    if (overlap && k % 4 == 3) t -= std::min<Millis>(d / 2, 400);
  }
  return turns;
}

std::vector<RttmTurn> random_hypothesis(std::mt19937_64& rng, Millis horizon, int clusters) {
  std::vector<RttmTurn> out;
  Millis t = std::uniform_int_distribution<Millis>(0, 500)(rng);
  while (t < horizon) {
    const Millis d = std::uniform_int_distribution<Millis>(100, 2500)(rng);
    out.push_back({"r", t, d, "c" + std::to_string(std::uniform_int_distribution<int>(0, clusters - 1)(rng))});
    t += d + std::uniform_int_distribution<Millis>(0, 600)(rng);
  }
  return out;
}

std::vector<oracle::Labelled> as_labelled(const std::vector<RttmTurn>& turns) {
  std::vector<oracle::Labelled> out;
  for (const auto& t : turns) out.push_back({t.onset, t.end(), t.speaker_id});
  return out;
}

}  // namespace

TEST(Timeline, SingleLabelCoversRegions) {
  auto set = build_multiscale({{0, 3000}, {4000, 5500}}, default_scales());
  auto hyp = labels_to_timeline(set, std::vector<int>(set.num_base(), 0));
  ASSERT_EQ(hyp.spans.size(), 2u);
  EXPECT_EQ(hyp.spans[0].start, 0);
  EXPECT_EQ(hyp.spans[0].end, 3000);
  EXPECT_EQ(hyp.spans[1].start, 4000);
  EXPECT_EQ(hyp.spans[1].end, 5500);
}

TEST(Timeline, BoundaryAtCenterMidpoint) {
  MultiScaleSegmentSet set;
  set.scales = {{500, 250, 170}};
  set.regions = {{0, 750}};
  set.segments = {{{0, 0, 500, 0}, {0, 250, 750, 0}}};
  set.map = {{0}, {1}};
  auto hyp = labels_to_timeline(set, {0, 1});
  ASSERT_EQ(hyp.spans.size(), 2u);
  EXPECT_EQ(hyp.spans[0].end, 375);
  EXPECT_EQ(hyp.spans[1].start, 375);
  EXPECT_THROW(labels_to_timeline(set, {0}), ValidationError);
}

TEST(Timeline, MatchesFrameOracle) {
  std::mt19937_64 rng(50);
  for (int trial = 0; trial < 20; ++trial) {
    SpeechRegionList regions;
    Millis t = 0;
    for (int k = 0; k < 4; ++k) {
      const Millis len = std::uniform_int_distribution<Millis>(600, 5000)(rng);
      regions.push_back({t, t + len});
      t += len + std::uniform_int_distribution<Millis>(1, 1000)(rng);
    }
    auto set = build_multiscale(regions, default_scales());
    std::vector<int> labels(set.num_base());
    for (auto& l : labels) l = std::uniform_int_distribution<int>(0, 2)(rng);
    auto hyp = labels_to_timeline(set, labels);
    auto want = oracle::frame_labels(set, labels, t);
    std::vector<int> got(static_cast<std::size_t>(t), -1);
    for (const auto& s : hyp.spans)
      for (Millis m = s.start; m < s.end; ++m) got[static_cast<std::size_t>(m)] = s.cluster;
    ASSERT_EQ(got, want);
  }
}

TEST(Der, IdenticalIsZero) {
  std::mt19937_64 rng(51);
  auto ref = random_reference(rng, 3, true);
  auto r = der(ref, ref);
  EXPECT_EQ(r.der(), 0.0);
  EXPECT_GT(r.total_speech, 0.0);
}

TEST(Der, SwappedIdsIsZero) {
  std::vector<RttmTurn> ref{{"r", 0, 3000, "A"}, {"r", 3000, 2000, "B"}};
  std::vector<RttmTurn> hyp{{"r", 0, 3000, "x"}, {"r", 3000, 2000, "y"}};
  EXPECT_EQ(der(ref, hyp).der(), 0.0);
}

TEST(Der, HalfSecondConfusionInTenSeconds) {
  std::vector<RttmTurn> ref{{"r", 0, 5000, "A"}, {"r", 5000, 5000, "B"}};
  std::vector<RttmTurn> hyp{{"r", 0, 5000, "h0"}, {"r", 5000, 4500, "h1"}, {"r", 9500, 500, "h0"}};
  DerConfig cfg;
  cfg.collar = 0;
  auto r = der(ref, hyp, cfg);
  EXPECT_NEAR(r.der(), 0.05, 1e-12);
  EXPECT_NEAR(r.confusion, 0.5, 1e-12);
  auto o = oracle::frame_der(as_labelled(ref), as_labelled(hyp), 0, false);
  EXPECT_NEAR(o.der(), 0.05, 1e-12);
}

TEST(Der, EmptyReferenceThrows) {
  EXPECT_THROW(der(std::vector<RttmTurn>{}, std::vector<RttmTurn>{}), ValidationError);
}

TEST(Der, MatchesFrameOracle) {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 40; ++trial) {
    const bool overlap = trial % 2 == 1;
    auto ref = random_reference(rng, 2 + trial % 3, overlap);
    Millis horizon = 0;
    for (const auto& t : ref) horizon = std::max(horizon, t.end());
    auto hyp = random_hypothesis(rng, horizon, 1 + trial % 4);
    for (Millis collar : {Millis{0}, Millis{250}})
      for (bool so : {false, true}) {
        DerConfig cfg;
        cfg.collar = collar;
        cfg.score_overlap = so;
        auto r = der(ref, hyp, cfg);
        auto o = oracle::frame_der(as_labelled(ref), as_labelled(hyp), collar, so);
        EXPECT_NEAR(r.total_speech, o.total, 1e-9);
        EXPECT_NEAR(r.miss, o.miss, 1e-9);
        EXPECT_NEAR(r.false_alarm, o.fa, 1e-9);
        EXPECT_NEAR(r.confusion, o.conf, 1e-9);
      }
  }
}

TEST(Der, ClusterRenamingIsInvariant) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    auto ref = random_reference(rng, 3, false);
    auto hyp = random_hypothesis(rng, 30000, 3);
    auto renamed = hyp;
    for (auto& t : renamed) t.speaker_id = "z" + t.speaker_id;
    EXPECT_EQ(der(ref, hyp).der(), der(ref, renamed).der());
  }
}

TEST(Der, CollarNeverIncreasesError) {
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 20; ++trial) {
    auto ref = random_reference(rng, 2, false);
    auto hyp = random_hypothesis(rng, 30000, 2);
    double prev = 1e300;
    for (Millis c : {0, 100, 250, 500}) {
      DerConfig cfg;
      cfg.collar = c;
      auto r = der(ref, hyp, cfg);
      const double err = r.miss + r.false_alarm + r.confusion;
      EXPECT_LE(err, prev + 1e-12);
      prev = err;
    }
  }
}

TEST(Der, RecordingMismatchThrows) {
  std::vector<RttmTurn> ref{{"a", 0, 1000, "A"}};
  std::vector<RttmTurn> hyp{{"b", 0, 1000, "x"}};
  EXPECT_THROW(der(ref, hyp), ValidationError);
}

TEST(Hungarian, MatchesBruteForce) {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t R = 1 + trial % 4, H = 1 + (trial / 4) % 5;
    std::vector<std::vector<double>> w(R, std::vector<double>(H));
    for (auto& row : w)
      for (auto& x : row) x = std::floor(u(rng));
    auto a = max_weight_assignment(w);
    double got = 0;
    std::vector<bool> used(H, false);
    for (std::size_t r = 0; r < R; ++r)
      if (a[r] >= 0) {
        ASSERT_FALSE(used[static_cast<std::size_t>(a[r])]);
        used[static_cast<std::size_t>(a[r])] = true;
        got += w[r][static_cast<std::size_t>(a[r])];
      }
    double best = 0;
    std::vector<bool> taken(H, false);
    auto rec = [&](auto&& self, std::size_t r, double acc) -> void {
      if (r == R) {
        best = std::max(best, acc);
        return;
      }
      self(self, r + 1, acc);
      for (std::size_t h = 0; h < H; ++h)
        if (!taken[h]) {
          taken[h] = true;
          self(self, r + 1, acc + w[r][h]);
          taken[h] = false;
        }
    };
    rec(rec, 0, 0.0);
    EXPECT_DOUBLE_EQ(got, best);
  }
}
