#include <gtest/gtest.h>

#include <set>

#include "privsec/synth.hpp"
#include "privsec/trajectory.hpp"

using namespace privsec;

namespace {
Trajectory line(const std::string& id, const GeoPoint& origin, std::vector<PlanarPoint> pts) {
  Trajectory t;
  t.id = id;
  for (const auto& p : pts) t.points.push_back(unproject(p, origin));
  return t;
}
}  // namespace

TEST(Trajectory, PathLengthOfStraightLine) {
  const GeoPoint o{-8.61, 41.15};
  const auto t = line("a", o, {{0, 0}, {300, 0}, {300, 400}});
  EXPECT_NEAR(path_length(t), 700.0, 1.0);
  EXPECT_NEAR(path_length(to_planar(t, o)), 700.0, 1e-6);
}

TEST(Trajectory, BBoxOfTrips) {
  const GeoPoint o{-8.61, 41.15};
  const auto b = bbox_of({line("a", o, {{0, 0}, {100, 100}}), line("b", o, {{-50, 20}})});
  EXPECT_LT(b.min_lon, o.lon);
  EXPECT_NEAR(b.min_lat, o.lat, 1e-12);
}

TEST(OdGrouping, SameCellsSameGroup) {
  const GeoPoint o{-8.61, 41.15};
  Corpus c;
  c.projection_origin = o;
  c.bbox = {unproject({-1000, -1000}, o).lon, unproject({-1000, -1000}, o).lat,
            unproject({1000, 1000}, o).lon, unproject({1000, 1000}, o).lat};
  // Lattice anchored at (-1000,-1000): cell [0,200) x [0,200) in local offsets.
  c.trajectories.push_back(line("a", o, {{-900, -900}, {0, 0}, {900, 900}}));
  c.trajectories.push_back(line("b", o, {{-850, -880}, {900, -900}, {890, 905}}));
  c.trajectories.push_back(line("c", o, {{-850, -880}, {-500, 500}}));
  const auto g = group_by_od(c, 200.0);
  EXPECT_EQ(g.size(), 2u);
  std::size_t largest = 0;
  for (const auto& [k, v] : g) largest = std::max(largest, v.size());
  EXPECT_EQ(largest, 2u);
}

TEST(Split, PerGroupCountsAndTrainRemainder) {
  SynthParams p;
  p.n_trips = 300;
  p.n_od_pairs = 10;
  Corpus c = synth_corpus(p);
  const auto groups = group_by_od(c);
  const auto s = split_test(c, groups, 5, 11);
  std::set<std::string> test(s.test.begin(), s.test.end());
  EXPECT_EQ(s.test.size() + s.train.size(), c.size());
  for (const auto& [k, members] : groups) {
    std::size_t in_test = 0;
    for (auto i : members) in_test += test.count(c.trajectories[i].id);
    if (members.size() == 1) {
      EXPECT_EQ(in_test, 0u);
    } else {
      EXPECT_EQ(in_test, std::min<std::size_t>(5, members.size() - 1));
    }
  }
  apply_split(c, s);
  EXPECT_EQ(c.count(Split::Test), s.test.size());
  EXPECT_EQ(split_test(c, groups, 5, 11).test, s.test);
}
