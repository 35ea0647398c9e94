#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "privsec/error.hpp"
#include "privsec/rng.hpp"
#include "privsec/trajectory.hpp"

namespace privsec {

struct SynthParams {
  int n_trips = 2000;
  int n_od_pairs = 60;
  double grid_extent_m = 8000.0;
  double speed_mps = 10.0;
  double sample_period_s = 15.0;  // Porto sampling period
  double jitter_m = 10.0;
  std::uint64_t seed = 1;

  double block_m = 400.0;          // street spacing
  int route_variants = 3;          // distinct routes per O-D pair
  double speed_spread = 0.15;      // per-trip speed factor in [1-s, 1+s]
  double detour_fraction = 0.05;   // trips taking a route of their own
  double min_od_distance_m = 3000.0;  // Manhattan distance between endpoints
  double max_od_distance_m = 6000.0;
  GeoPoint center{-8.61, 41.15};

  void validate() const {
    if (n_trips <= 0 || n_od_pairs <= 0 || !(grid_extent_m > 0) || !(speed_mps > 0) ||
        !(sample_period_s > 0) || jitter_m < 0 || !(block_m > 0) || route_variants <= 0 ||
        speed_spread < 0 || speed_spread >= 1 || detour_fraction < 0 || detour_fraction > 1 || !(min_od_distance_m > 0) ||
        max_od_distance_m < min_od_distance_m) {
      throw ValidationError("synth: all parameters must be positive and consistent");
    }
  }
};

namespace detail {

struct GridNode {
  int i = 0;
  int j = 0;
  auto operator<=>(const GridNode&) const = default;
};

// One step sequence: +/-1 moves along x ('x') or y ('y').
inline std::string staircase(int nx, int ny, Rng& rng) {
  // Split each axis into 1..3 runs and interleave them, which gives routes
  // with few turns rather than a dense random staircase.
  const int runs = 1 + static_cast<int>(rng.below(3));
  auto split = [&](int total) {
    std::vector<int> parts(static_cast<std::size_t>(runs), 0);
    for (int s = 0; s < total; ++s) parts[rng.below(static_cast<std::uint64_t>(runs))]++;
    return parts;
  };
  const auto xs = split(nx);
  const auto ys = split(ny);
  const bool x_first = rng.below(2) == 0;
  std::string seq;
  for (int r = 0; r < runs; ++r) {
    const std::string a(static_cast<std::size_t>(xs[static_cast<std::size_t>(r)]), 'x');
    const std::string b(static_cast<std::size_t>(ys[static_cast<std::size_t>(r)]), 'y');
    seq += x_first ? a + b : b + a;
  }
  return seq;
}

inline std::vector<PlanarPoint> walk(const PlanarPoint& start, const std::string& steps, double dx,
                                     double dy) {
  std::vector<PlanarPoint> pts{start};
  PlanarPoint p = start;
  for (char s : steps) {
    if (s == 'x') p.x += dx; else p.y += dy;
    pts.push_back(p);
  }
  // Drop interior nodes on straight runs.
  std::vector<PlanarPoint> corners{pts.front()};
  for (std::size_t k = 1; k + 1 < pts.size(); ++k) {
    if (steps[k - 1] != steps[k]) corners.push_back(pts[k]);
  }
  corners.push_back(pts.back());
  return corners;
}

// Points every `spacing` meters along the polyline, plus its last vertex.
inline std::vector<PlanarPoint> sample_along(const std::vector<PlanarPoint>& poly, double spacing) {
  std::vector<PlanarPoint> out{poly.front()};
  double carry = 0.0;  // distance travelled since the last sample
  for (std::size_t k = 1; k < poly.size(); ++k) {
    const PlanarPoint a = poly[k - 1];
    const PlanarPoint b = poly[k];
    const double len = distance(a, b);
    double s = spacing - carry;
    while (s < len) {
      out.push_back(a + (b - a) * (s / len));
      s += spacing;
    }
    carry = len - (s - spacing);
  }
  if (distance(out.back(), poly.back()) > 1e-9) out.push_back(poly.back());
  return out;
}

}  // namespace detail

/// Manhattan-grid trip corpus.
///
/// Street nodes sit 500 m + k * block_m from the south-west corner of the
/// region. With block_m a multiple of 400 they fall on the centres of the
/// default 200 m O-D cells and jitter never changes a trip's O-D group;
/// other spacings put some nodes near cell edges, as with real GPS. Each
/// O-D pair has `route_variants` distinct routes chosen with weights
/// proportional to 2^-v; a `detour_fraction` of trips instead draws a fresh
/// route of its own. Trips are assigned to pairs round-robin.
inline Corpus synth_corpus(const SynthParams& p) {
  p.validate();
  const double half = p.grid_extent_m / 2;
  const GeoPoint origin = p.center;
  Corpus c;
  c.bbox = {unproject({-half, -half}, origin).lon, unproject({-half, -half}, origin).lat,
            unproject({half, half}, origin).lon, unproject({half, half}, origin).lat};
  c.projection_origin = origin;

  const double margin = 500.0;
  const int nodes = static_cast<int>(std::floor((p.grid_extent_m - 2 * margin) / p.block_m)) + 1;
  if (nodes < 2) throw ValidationError("synth: grid extent too small for one block");
  auto node_xy = [&](const detail::GridNode& n) {
    return PlanarPoint{-half + margin + n.i * p.block_m, -half + margin + n.j * p.block_m};
  };

  Rng layout(derive_seed(p.seed, "layout"));
  struct OdPlan {
    detail::GridNode o, d;
    int nx = 0, ny = 0;
    std::vector<std::vector<PlanarPoint>> routes;
  };
  std::vector<OdPlan> plans;
  std::set<std::pair<detail::GridNode, detail::GridNode>> used;
  const int max_attempts = 100000;
  for (int attempt = 0; static_cast<int>(plans.size()) < p.n_od_pairs; ++attempt) {
    if (attempt > max_attempts) throw ValidationError("synth: cannot place that many O-D pairs");
    const detail::GridNode o{static_cast<int>(layout.below(static_cast<std::uint64_t>(nodes))),
                             static_cast<int>(layout.below(static_cast<std::uint64_t>(nodes)))};
    const detail::GridNode d{static_cast<int>(layout.below(static_cast<std::uint64_t>(nodes))),
                             static_cast<int>(layout.below(static_cast<std::uint64_t>(nodes)))};
    const int nx = std::abs(d.i - o.i);
    const int ny = std::abs(d.j - o.j);
    const double manhattan = (nx + ny) * p.block_m;
    if (nx == 0 || ny == 0 || manhattan < p.min_od_distance_m || manhattan > p.max_od_distance_m ||
        used.count({o, d})) {
      continue;
    }
    OdPlan plan{o, d, nx, ny, {}};
    std::set<std::string> seen;
    for (int tries = 0; static_cast<int>(plan.routes.size()) < p.route_variants && tries < 200;
         ++tries) {
      std::string steps = detail::staircase(nx, ny, layout);
      if (!seen.insert(steps).second) continue;
      plan.routes.push_back(detail::walk(node_xy(o), steps, d.i > o.i ? p.block_m : -p.block_m,
                                         d.j > o.j ? p.block_m : -p.block_m));
    }
    used.insert({o, d});
    plans.push_back(std::move(plan));
  }

  c.trajectories.reserve(static_cast<std::size_t>(p.n_trips));
  for (int t = 0; t < p.n_trips; ++t) {
    const OdPlan& plan = plans[static_cast<std::size_t>(t % p.n_od_pairs)];
    Rng rng(derive_seed(p.seed, static_cast<std::uint64_t>(t)));
    double total_w = 0.0;
    for (std::size_t v = 0; v < plan.routes.size(); ++v) total_w += std::ldexp(1.0, -static_cast<int>(v));
    double pick = rng.uniform() * total_w;
    std::size_t variant = 0;
    while (variant + 1 < plan.routes.size() && pick >= std::ldexp(1.0, -static_cast<int>(variant))) {
      pick -= std::ldexp(1.0, -static_cast<int>(variant));
      ++variant;
    }
    const double speed = p.speed_mps * rng.uniform(1.0 - p.speed_spread, 1.0 + p.speed_spread);
    std::vector<PlanarPoint> route = plan.routes[variant];
    if (rng.uniform() < p.detour_fraction) {
      route = detail::walk(node_xy(plan.o), detail::staircase(plan.nx, plan.ny, rng),
                           plan.d.i > plan.o.i ? p.block_m : -p.block_m,
                           plan.d.j > plan.o.j ? p.block_m : -p.block_m);
    }
    const auto samples = detail::sample_along(route, speed * p.sample_period_s);

    Trajectory trip;
    char id[32];
    std::snprintf(id, sizeof id, "S%06d", t);
    trip.id = id;
    trip.points.reserve(samples.size());
    for (const auto& s : samples) {
      PlanarPoint q = s;
      if (p.jitter_m > 0) {
        q.x += p.jitter_m * rng.normal();
        q.y += p.jitter_m * rng.normal();
      }
      trip.points.push_back(c.bbox.clamp(unproject(q, origin)));
    }
    c.trajectories.push_back(std::move(trip));
  }
  return c;
}

}  // namespace privsec
