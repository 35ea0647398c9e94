#include <gtest/gtest.h>

#include <cmath>

#include "privsec/attack.hpp"

using namespace privsec;

namespace {
const GeoPoint kOrigin{-8.61, 41.15};
const BBox kRegion{unproject({-5000, -5000}, kOrigin).lon, unproject({-5000, -5000}, kOrigin).lat,
                   unproject({5000, 5000}, kOrigin).lon, unproject({5000, 5000}, kOrigin).lat};

Trajectory straight(std::size_t n, double step_m, double y0 = 0.0) {
  Trajectory t;
  t.id = "t";
  for (std::size_t i = 0; i < n; ++i) t.points.push_back(unproject({i * step_m, y0}, kOrigin));
  return t;
}
}  // namespace

TEST(AttackIndices, SameOdKeepsEndpoints) {
  for (std::size_t n : {3u, 10u, 41u}) {
    for (double q : {0.0, 0.25, 0.5, 1.0}) {
      const auto idx = attack_indices(n, q, OdMode::SameOD);
      EXPECT_LE(idx.size(), n - 2);
      EXPECT_EQ(idx.size(), std::min<std::size_t>(std::lround(q * n), n - 2));
      for (std::size_t k = 0; k < idx.size(); ++k) {
        EXPECT_GT(idx[k], 0u);
        EXPECT_LT(idx[k], n - 1);
        if (k) EXPECT_GT(idx[k], idx[k - 1]);
      }
    }
  }
}

TEST(AttackIndices, ShiftedOdIncludesEndpoints) {
  const auto idx = attack_indices(20, 0.5, OdMode::ShiftedOD);
  EXPECT_EQ(idx.size(), 10u);
  EXPECT_EQ(idx.front(), 0u);
  EXPECT_EQ(idx.back(), 19u);
}

TEST(Attack, DisplacementIsExactlyC) {
  const auto t = straight(30, 100);
  for (double c : {100.0, 300.0, 700.0}) {
    MaliciousIntent in{c, 0.5, OdMode::SameOD};
    const auto a = generate_malicious(t, in, kRegion, kOrigin, 1);
    EXPECT_FALSE(a.clipped);
    EXPECT_EQ(a.m, 15u);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double d = distance(project(a.trajectory.points[i], kOrigin), project(t.points[i], kOrigin));
      const bool tampered = std::binary_search(a.tampered.begin(), a.tampered.end(), i);
      EXPECT_NEAR(d, tampered ? c : 0.0, 0.01) << "i=" << i;
    }
    EXPECT_GT(a.reward_gain, 0.0);
    EXPECT_EQ(a.trajectory.label, Label::Malicious);
  }
}

TEST(Attack, RewardGainMatchesPathLengths) {
  const auto t = straight(25, 80);
  const auto a = generate_malicious(t, {300, 0.5, OdMode::SameOD}, kRegion, kOrigin, 2);
  EXPECT_NEAR(a.reward_gain, path_length(a.trajectory) - path_length(t), 1e-9);
}

TEST(Attack, ZeroQLeavesTripUnchanged) {
  const auto t = straight(25, 80);
  const auto a = generate_malicious(t, {700, 0.0, OdMode::SameOD}, kRegion, kOrigin, 3);
  EXPECT_EQ(a.m, 0u);
  EXPECT_DOUBLE_EQ(a.reward_gain, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_TRUE(a.trajectory.points[i] == t.points[i]);
}

TEST(Attack, SameOdRejectsShortTrips) {
  EXPECT_THROW(generate_malicious(straight(2, 50), {300, 0.5, OdMode::SameOD}, kRegion, kOrigin, 1),
               ValidationError);
  EXPECT_NO_THROW(
      generate_malicious(straight(2, 50), {300, 1.0, OdMode::ShiftedOD}, kRegion, kOrigin, 1));
}

TEST(Attack, ShiftedOdMovesEndpointsInsideRegion) {
  const auto t = straight(30, 100);
  const auto a = generate_malicious(t, {300, 0.5, OdMode::ShiftedOD}, kRegion, kOrigin, 4);
  EXPECT_FALSE(a.trajectory.front() == t.front());
  EXPECT_FALSE(a.trajectory.back() == t.back());
  EXPECT_TRUE(kRegion.contains(a.trajectory.front()));
  EXPECT_TRUE(kRegion.contains(a.trajectory.back()));
}

TEST(Attack, ClippingAtRegionEdge) {
  const auto t = straight(30, 100, 4900.0);  // runs 100 m below the north edge
  const auto a = generate_malicious(t, {700, 1.0, OdMode::SameOD}, kRegion, kOrigin, 5);
  EXPECT_TRUE(a.clipped);
  for (const auto& p : a.trajectory.points) EXPECT_TRUE(kRegion.contains(p));
}

TEST(Attack, RejectsBadIntent) {
  EXPECT_THROW(generate_malicious(straight(5, 10), {-1, 0.5, OdMode::SameOD}, kRegion, kOrigin, 1),
               ValidationError);
  EXPECT_THROW(generate_malicious(straight(5, 10), {10, 1.5, OdMode::SameOD}, kRegion, kOrigin, 1),
               ValidationError);
}

TEST(Inject, AddsLabelledCounterparts) {
  std::vector<Trajectory> trips;
  for (int i = 0; i < 10; ++i) {
    auto t = straight(20, 60, i * 100.0);
    t.id = "T" + std::to_string(i);
    t.split = i < 6 ? Split::Test : Split::Train;
    trips.push_back(t);
  }
  trips[0].points.resize(2);  // too short for SameOD
  Corpus c = Corpus::from_trajectories(trips);
  const auto ids = ids_in_split(c, Split::Test);
  const auto r = inject_attacks(c, ids, {300, 0.5, OdMode::SameOD}, 1.0, 7);
  EXPECT_EQ(r.rejected, 1u);
  EXPECT_EQ(r.manifest.size(), 5u);
  EXPECT_EQ(r.corpus.size(), 15u);
  EXPECT_EQ(r.corpus.count(Label::Malicious), 5u);
  for (const auto& row : r.manifest) EXPECT_EQ(row.trip_id, malicious_id(row.source_trip_id));
  const auto half = inject_attacks(c, ids, {300, 0.5, OdMode::SameOD}, 0.5, 7);
  EXPECT_LE(half.manifest.size(), 3u);
}
