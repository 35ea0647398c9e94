#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "privsec/csv.hpp"
#include "privsec/error.hpp"
#include "privsec/rng.hpp"
#include "privsec/trajectory.hpp"

namespace privsec {

enum class OdMode { SameOD, ShiftedOD };

inline const char* to_string(OdMode m) { return m == OdMode::SameOD ? "same" : "shifted"; }

inline OdMode parse_od_mode(const std::string& s) {
  if (s == "same") return OdMode::SameOD;
  if (s == "shifted") return OdMode::ShiftedOD;
  throw ValidationError("unknown od mode '" + s + "' (expected same|shifted)");
}

/// Adversary strength: each tampered point moves `c` meters; a fraction `q`
/// of the points is tampered.
struct MaliciousIntent {
  double c = 300.0;
  double q = 0.5;
  OdMode od_mode = OdMode::SameOD;

  void validate() const {
    if (!(c >= 0) || !std::isfinite(c)) throw ValidationError("intent: c must be >= 0");
    if (!(q >= 0 && q <= 1)) throw ValidationError("intent: q must lie in [0, 1]");
  }
};

struct AttackOutcome {
  Trajectory trajectory;
  std::size_t m = 0;                 // tampered points
  double reward_gain = 0.0;          // path_length(out) - path_length(in), meters
  bool clipped = false;              // some point was pulled back into the region
  std::vector<std::size_t> tampered; // indices, ascending
};

/// Evenly spaced interior indices 1..n-2, `m` of them (m <= n - 2).
inline std::vector<std::size_t> spread_interior(std::size_t n, std::size_t m) {
  std::vector<std::size_t> idx;
  if (m == 0 || n < 3) return idx;
  const double span = static_cast<double>(n - 2);
  for (std::size_t j = 0; j < m; ++j) {
    idx.push_back(1 + static_cast<std::size_t>(std::floor((static_cast<double>(j) + 0.5) * span /
                                                          static_cast<double>(m))));
  }
  return idx;
}

/// Indices the attack tampers: interior-only for SameOD, endpoints first for
/// ShiftedOD.
inline std::vector<std::size_t> attack_indices(std::size_t n, double q, OdMode mode) {
  const auto target = static_cast<std::size_t>(std::lround(q * static_cast<double>(n)));
  if (mode == OdMode::SameOD) {
    return spread_interior(n, std::min(target, n >= 2 ? n - 2 : 0));
  }
  std::vector<std::size_t> idx;
  if (target >= 1) idx.push_back(0);
  if (target >= 2) idx.push_back(n - 1);
  if (target > 2) {
    for (auto i : spread_interior(n, std::min(target - 2, n - 2))) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Unit normal to the local heading at interior index i (left of travel).
inline PlanarPoint local_normal(const PlanarPath& path, std::size_t i) {
  PlanarPoint h = path[std::min(i + 1, path.size() - 1)] - path[i > 0 ? i - 1 : 0];
  double len = std::hypot(h.x, h.y);
  if (len < 1e-9 && i > 0) {
    h = path[i] - path[i - 1];
    len = std::hypot(h.x, h.y);
  }
  if (len < 1e-9) return {0.0, 1.0};
  return {-h.y / len, h.x / len};
}

/// Greedy distance-inflation attack.
///
/// Tampered interior points are displaced by exactly `c` perpendicular to the
/// local heading with alternating sign, which lengthens the path as much as
/// possible under a per-point displacement bound. ShiftedOD additionally
/// redraws the origin and destination uniformly inside `region`. Points are
/// clamped to `region`; `clipped` reports when that happened.
inline AttackOutcome generate_malicious(const Trajectory& t, const MaliciousIntent& intent,
                                        const BBox& region, const GeoPoint& origin,
                                        std::uint64_t seed) {
  intent.validate();
  const std::size_t n = t.size();
  if (intent.od_mode == OdMode::SameOD && n < 3) {
    throw ValidationError("attack: trip " + t.id + " has fewer than 3 points (endpoints are kept)");
  }
  if (n < 1) throw ValidationError("attack: empty trip " + t.id);

  AttackOutcome out;
  out.trajectory = t;
  out.trajectory.label = Label::Malicious;
  out.tampered = attack_indices(n, intent.q, intent.od_mode);
  out.m = out.tampered.size();

  Rng rng(seed);
  const PlanarPath path = to_planar(t, origin);
  double sign = rng.below(2) == 0 ? 1.0 : -1.0;
  for (std::size_t i : out.tampered) {
    GeoPoint moved;
    if (intent.od_mode == OdMode::ShiftedOD && (i == 0 || i == n - 1)) {
      moved = {rng.uniform(region.min_lon, region.max_lon),
               rng.uniform(region.min_lat, region.max_lat)};
    } else {
      moved = unproject(path[i] + local_normal(path, i) * (sign * intent.c), origin);
      sign = -sign;
    }
    const GeoPoint kept = region.clamp(moved);
    if (!(kept == moved)) out.clipped = true;
    out.trajectory.points[i] = kept;
  }
  out.reward_gain = path_length(out.trajectory) - path_length(t);
  return out;
}

struct AttackManifestRow {
  std::string trip_id;
  std::string source_trip_id;
  MaliciousIntent intent;
  std::size_t m = 0;
  double reward_gain_m = 0.0;
};

struct InjectResult {
  Corpus corpus;  // input trips followed by the malicious ones
  std::vector<AttackManifestRow> manifest;
  std::size_t rejected = 0;
};

inline std::string malicious_id(const std::string& source) { return source + "-M"; }

/// Adds a malicious counterpart for a seeded `attack_fraction` subset of the
/// test trips. Originals are kept; the new trips are labelled Malicious and
/// belong to the test split.
inline InjectResult inject_attacks(const Corpus& c, const std::vector<std::string>& test_ids,
                                   const MaliciousIntent& intent, double attack_fraction,
                                   std::uint64_t seed) {
  intent.validate();
  if (!(attack_fraction > 0 && attack_fraction <= 1)) {
    throw ValidationError("attack_fraction must lie in (0, 1]");
  }
  std::vector<std::string> pool = test_ids;
  std::sort(pool.begin(), pool.end());
  Rng rng(derive_seed(seed, "select"));
  rng.shuffle(pool.begin(), pool.end());
  pool.resize(static_cast<std::size_t>(
      std::lround(attack_fraction * static_cast<double>(pool.size()))));
  const std::unordered_set<std::string> chosen(pool.begin(), pool.end());

  InjectResult res{c, {}, 0};
  for (const auto& t : c.trajectories) {
    if (!chosen.count(t.id)) continue;
    AttackOutcome a;
    try {
      a = generate_malicious(t, intent, c.bbox, c.projection_origin, derive_seed(seed, t.id));
    } catch (const ValidationError&) {
      ++res.rejected;
      continue;
    }
    a.trajectory.id = malicious_id(t.id);
    a.trajectory.split = Split::Test;
    res.manifest.push_back({a.trajectory.id, t.id, intent, a.m, a.reward_gain});
    res.corpus.trajectories.push_back(std::move(a.trajectory));
  }
  return res;
}

inline std::vector<std::string> ids_in_split(const Corpus& c, Split s) {
  std::vector<std::string> ids;
  for (const auto& t : c.trajectories) {
    if (t.split == s) ids.push_back(t.id);
  }
  return ids;
}

inline void write_manifest(const std::vector<AttackManifestRow>& rows, const std::string& path) {
  auto out = csv::open_out(path);
  out << "trip_id,source_trip_id,c,q,od_mode,m,reward_gain_m\n";
  for (const auto& r : rows) {
    out << r.trip_id << "," << r.source_trip_id << "," << csv::fmt_double(r.intent.c, 3) << ","
        << csv::fmt_double(r.intent.q, 3) << "," << to_string(r.intent.od_mode) << "," << r.m
        << "," << csv::fmt_double(r.reward_gain_m, 3) << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace privsec
