#include <gtest/gtest.h>

#include "privsec/synth.hpp"

using namespace privsec;

TEST(Synth, DefaultsGiveRequestedTrips) {
  const Corpus c = synth_corpus(SynthParams{});
  EXPECT_EQ(c.size(), 2000u);
  EXPECT_GE(group_by_od(c).size(), 50u);
  for (const auto& t : c.trajectories) {
    ASSERT_GE(t.size(), 3u);
    for (const auto& p : t.points) ASSERT_TRUE(c.bbox.contains(p));
  }
}

TEST(Synth, Deterministic) {
  SynthParams p;
  p.n_trips = 50;
  p.n_od_pairs = 5;
  const Corpus a = synth_corpus(p), b = synth_corpus(p);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.trajectories[i].points.size(), b.trajectories[i].points.size());
    EXPECT_EQ(a.trajectories[i].points.back().lon, b.trajectories[i].points.back().lon);
  }
  p.seed = 2;
  EXPECT_NE(synth_corpus(p).trajectories[0].points[1].lon, a.trajectories[0].points[1].lon);
}

TEST(Synth, SamplingSpacingFollowsSpeed) {
  SynthParams p;
  p.n_trips = 20;
  p.n_od_pairs = 4;
  p.jitter_m = 0;
  p.speed_spread = 0;
  const Corpus c = synth_corpus(p);
  for (const auto& t : c.trajectories) {
    const auto path = to_planar(t, c.projection_origin);
    // Consecutive samples are at most speed * period apart (less across corners).
    for (std::size_t i = 1; i < path.size(); ++i) {
      EXPECT_LE(distance(path[i - 1], path[i]), p.speed_mps * p.sample_period_s + 1e-6);
    }
  }
}

TEST(Synth, RejectsBadParameters) {
  SynthParams p;
  p.n_trips = 0;
  EXPECT_THROW(synth_corpus(p), ValidationError);
  p = SynthParams{};
  p.min_od_distance_m = 9000;
  EXPECT_THROW(synth_corpus(p), ValidationError);
}
