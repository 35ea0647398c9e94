#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "privsec/error.hpp"
#include "privsec/geo.hpp"
#include "privsec/rng.hpp"

namespace privsec {

enum class Label { Normal, Malicious };
enum class Split { Train, Test };

inline const char* to_string(Label l) { return l == Label::Normal ? "normal" : "malicious"; }
inline const char* to_string(Split s) { return s == Split::Train ? "train" : "test"; }

struct Trajectory {
  std::string id;
  std::vector<GeoPoint> points;
  Label label = Label::Normal;
  Split split = Split::Train;

  std::size_t size() const { return points.size(); }
  const GeoPoint& front() const { return points.front(); }
  const GeoPoint& back() const { return points.back(); }
};

using PlanarPath = std::vector<PlanarPoint>;

inline PlanarPath to_planar(const Trajectory& t, const GeoPoint& origin) {
  PlanarPath out;
  out.reserve(t.points.size());
  for (const auto& p : t.points) out.push_back(project(p, origin));
  return out;
}

/// Sum of haversine distances over consecutive points.
inline double path_length(const Trajectory& t) {
  double total = 0.0;
  for (std::size_t i = 1; i < t.points.size(); ++i) {
    total += haversine(t.points[i - 1], t.points[i]);
  }
  return total;
}

inline double path_length(const PlanarPath& path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += distance(path[i - 1], path[i]);
  return total;
}

inline BBox bbox_of(const std::vector<Trajectory>& trips) {
  BBox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& t : trips) {
    for (const auto& p : t.points) {
      b.min_lon = std::min(b.min_lon, p.lon);
      b.min_lat = std::min(b.min_lat, p.lat);
      b.max_lon = std::max(b.max_lon, p.lon);
      b.max_lat = std::max(b.max_lat, p.lat);
    }
  }
  return b;
}

/// A set of trips with its feasibility region and projection origin.
///
/// `bbox` is the feasible region for fabricated points and the anchor of the
/// origin-destination cell lattice. It is carried through perturbation
/// unchanged, so noisy points may fall outside it.
struct Corpus {
  std::vector<Trajectory> trajectories;
  BBox bbox;
  GeoPoint projection_origin;

  static Corpus from_trajectories(std::vector<Trajectory> trips) {
    Corpus c;
    c.trajectories = std::move(trips);
    c.bbox = bbox_of(c.trajectories);
    c.projection_origin = c.bbox.centroid();
    return c;
  }

  std::size_t size() const { return trajectories.size(); }

  /// Empty corpus sharing this corpus' region and projection.
  Corpus empty_like() const {
    Corpus c;
    c.bbox = bbox;
    c.projection_origin = projection_origin;
    return c;
  }

  std::size_t count(Label l) const {
    return static_cast<std::size_t>(std::count_if(
        trajectories.begin(), trajectories.end(), [l](const Trajectory& t) { return t.label == l; }));
  }
  std::size_t count(Split s) const {
    return static_cast<std::size_t>(std::count_if(
        trajectories.begin(), trajectories.end(), [s](const Trajectory& t) { return t.split == s; }));
  }
};

// ---------------------------------------------------------------------------
// Origin-destination grouping

struct OdKey {
  std::int64_t origin_cell = 0;
  std::int64_t dest_cell = 0;
  auto operator<=>(const OdKey&) const = default;
};

inline std::string to_string(const OdKey& k) {
  return std::to_string(k.origin_cell) + ":" + std::to_string(k.dest_cell);
}

inline constexpr double kDefaultCellSideM = 200.0;

/// Maps planar positions to integer cells of a square lattice anchored at
/// the bbox south-west corner. Cells outside the bbox get valid (possibly
/// negative) coordinates as well.
class CellLattice {
 public:
  CellLattice(const BBox& bbox, const GeoPoint& origin, double cell_side)
      : origin_(origin), anchor_(project(bbox.min_corner(), origin)), side_(cell_side) {
    if (!(cell_side > 0)) throw ValidationError("cell side must be positive");
  }

  std::int64_t cell(const GeoPoint& p) const {
    const PlanarPoint q = project(p, origin_) - anchor_;
    const auto cx = static_cast<std::int64_t>(std::floor(q.x / side_));
    const auto cy = static_cast<std::int64_t>(std::floor(q.y / side_));
    // Pack (cx, cy) losslessly for |c| < 2^31.
    return (cx << 32) ^ static_cast<std::int64_t>(static_cast<std::uint32_t>(cy));
  }

  OdKey key(const Trajectory& t) const { return {cell(t.front()), cell(t.back())}; }

 private:
  GeoPoint origin_;
  PlanarPoint anchor_;
  double side_;
};

/// O-D group -> indices into corpus.trajectories (in corpus order).
using OdGroups = std::map<OdKey, std::vector<std::size_t>>;

inline OdGroups group_by_od(const Corpus& c, double cell_side = kDefaultCellSideM) {
  if (c.trajectories.empty()) throw ValidationError("group_by_od: empty corpus");
  const CellLattice lattice(c.bbox, c.projection_origin, cell_side);
  OdGroups groups;
  for (std::size_t i = 0; i < c.trajectories.size(); ++i) {
    groups[lattice.key(c.trajectories[i])].push_back(i);
  }
  return groups;
}

struct TrainTestSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Picks up to `per_group` test trips per O-D group, always leaving at least
/// one trip of the group in train. Singleton groups go to train.
inline TrainTestSplit split_test(const Corpus& c, const OdGroups& groups, int per_group,
                                 std::uint64_t seed) {
  if (per_group < 1) throw ValidationError("split_test: per_group must be >= 1");
  TrainTestSplit out;
  for (const auto& [key, members] : groups) {
    std::vector<std::size_t> order = members;
    Rng rng(derive_seed(seed, to_string(key)));
    rng.shuffle(order.begin(), order.end());
    const std::size_t n_test =
        order.size() > 1 ? std::min<std::size_t>(static_cast<std::size_t>(per_group), order.size() - 1)
                         : 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      (i < n_test ? out.test : out.train).push_back(c.trajectories[order[i]].id);
    }
  }
  return out;
}

/// Writes the split into each trajectory's `split` field.
inline void apply_split(Corpus& c, const TrainTestSplit& split) {
  const std::unordered_set<std::string> test(split.test.begin(), split.test.end());
  for (auto& t : c.trajectories) t.split = test.count(t.id) ? Split::Test : Split::Train;
}

}  // namespace privsec
