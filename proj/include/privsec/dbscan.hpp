#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "privsec/error.hpp"
#include "privsec/frechet.hpp"
#include "privsec/roc.hpp"
#include "privsec/trajectory.hpp"

namespace privsec {

struct DbscanParams {
  double eps = 200.0;  // neighbourhood radius, meters of Frechet distance
  int min_pts = 3;     // neighbourhood size (self included) for a core trip
  int score_k = 0;     // neighbour rank for the k-distance score; 0 selects min_pts

  int k() const { return score_k > 0 ? score_k : min_pts; }

  void validate() const {
    if (!(eps > 0)) throw ValidationError("dbscan: eps must be > 0");
    if (min_pts < 2 || min_pts > 10) throw ValidationError("dbscan: min_pts must lie in [2, 10]");
    if (score_k < 0) throw ValidationError("dbscan: score_k must be >= 1");
  }
};

inline constexpr int kNoise = -1;

struct ClusterAssignment {
  std::vector<int> labels;  // cluster id >= 0, or kNoise
  std::vector<bool> core;
  int n_clusters = 0;

  std::size_t noise_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNoise));
  }
};

/// Density clustering over a precomputed distance matrix. Trips are visited
/// in index order; a border trip joins the first cluster that reaches it.
inline ClusterAssignment dbscan(const DistanceMatrix& m, const DbscanParams& params) {
  params.validate();
  const std::size_t n = m.n();
  constexpr int kUnvisited = -2;
  ClusterAssignment out;
  out.labels.assign(n, kUnvisited);
  out.core.assign(n, false);

  auto neighbours = [&](std::size_t i) {
    std::vector<std::size_t> nb;
    for (std::size_t j = 0; j < n; ++j) {
      if (m.at(i, j) <= params.eps) nb.push_back(j);
    }
    return nb;
  };
  const auto min_pts = static_cast<std::size_t>(params.min_pts);
  for (std::size_t i = 0; i < n; ++i) out.core[i] = neighbours(i).size() >= min_pts;

  for (std::size_t i = 0; i < n; ++i) {
    if (out.labels[i] != kUnvisited) continue;
    if (!out.core[i]) {
      out.labels[i] = kNoise;  // may become a border trip later
      continue;
    }
    const int cluster = out.n_clusters++;
    out.labels[i] = cluster;
    std::deque<std::size_t> frontier;
    for (auto j : neighbours(i)) frontier.push_back(j);
    while (!frontier.empty()) {
      const std::size_t q = frontier.front();
      frontier.pop_front();
      if (out.labels[q] == kNoise) out.labels[q] = cluster;
      if (out.labels[q] != kUnvisited) continue;
      out.labels[q] = cluster;
      if (out.core[q]) {
        for (auto j : neighbours(q)) {
          if (out.labels[j] == kUnvisited || out.labels[j] == kNoise) frontier.push_back(j);
        }
      }
    }
  }
  return out;
}

/// Distances from row `i` to every other trip, ascending.
inline std::vector<double> sorted_neighbour_distances(const DistanceMatrix& m, std::size_t i) {
  std::vector<double> d;
  d.reserve(m.n());
  for (std::size_t j = 0; j < m.n(); ++j) {
    if (j != i) d.push_back(m.at(i, j));
  }
  std::sort(d.begin(), d.end());
  return d;
}

/// k-th smallest entry (1-based) or +inf when fewer than k exist.
inline double kth_distance(const std::vector<double>& sorted, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > sorted.size()) {
    return std::numeric_limits<double>::infinity();
  }
  return sorted[static_cast<std::size_t>(k - 1)];
}

/// k-distance outlier score: Frechet distance to the trip's k-th nearest
/// neighbour, k = params.k(). Trips with fewer than k neighbours score +inf.
inline double outlier_score(const DistanceMatrix& m, const DbscanParams& params,
                            std::size_t trip_index) {
  return kth_distance(sorted_neighbour_distances(m, trip_index), params.k());
}

/// What a detector is allowed to see: no ground-truth label.
struct UnlabeledTrip {
  std::string id;
  Split split = Split::Train;
  std::vector<GeoPoint> points;
};

inline std::vector<UnlabeledTrip> strip_labels(const Corpus& c) {
  std::vector<UnlabeledTrip> out;
  out.reserve(c.size());
  for (const auto& t : c.trajectories) out.push_back({t.id, t.split, t.points});
  return out;
}

/// Re-attaches ground truth to scores by trip id.
inline void attach_truth(std::vector<ScoredTrip>& scores, const Corpus& c) {
  std::map<std::string, Label> truth;
  for (const auto& t : c.trajectories) truth[t.id] = t.label;
  for (auto& s : scores) s.truth = truth.at(s.trip_id);
}

struct DbscanDetectOptions {
  DbscanParams params;
  double cell_side = kDefaultCellSideM;
  unsigned long long pair_budget = 5'000'000;
  unsigned jobs = 1;
  std::string cache_dir;  // empty: no matrix cache
};

struct DbscanDetectResult {
  std::vector<ScoredTrip> scores;             // test trips only, corpus order
  std::vector<std::vector<double>> neighbours;  // sorted neighbour distances per score
  std::size_t groups = 0;
  std::size_t clusters = 0;
  std::size_t noise_trips = 0;
  std::size_t sentinel_scores = 0;  // test trips in groups too small to score
  PairwiseTiming timing;
};

namespace detail {

struct GroupedTrips {
  OdGroups groups;
  std::vector<PlanarPath> paths;
  std::vector<std::string> keys;  // O-D key per trip
};

inline GroupedTrips group_trips(const std::vector<UnlabeledTrip>& trips, const BBox& bbox,
                                const GeoPoint& origin, double cell_side) {
  if (trips.empty()) throw ValidationError("detect: empty corpus");
  GroupedTrips g;
  const CellLattice lattice(bbox, origin, cell_side);
  for (std::size_t i = 0; i < trips.size(); ++i) {
    const auto& pts = trips[i].points;
    if (pts.empty()) throw ValidationError("detect: empty trip " + trips[i].id);
    const OdKey key{lattice.cell(pts.front()), lattice.cell(pts.back())};
    g.groups[key].push_back(i);
    g.keys.push_back(to_string(key));
    PlanarPath path;
    path.reserve(pts.size());
    for (const auto& p : pts) path.push_back(project(p, origin));
    g.paths.push_back(std::move(path));
  }
  return g;
}

inline DistanceMatrix group_matrix(const GroupedTrips& g, const std::vector<std::size_t>& members,
                                   const std::vector<UnlabeledTrip>& trips,
                                   const DbscanDetectOptions& opt, PairwiseTiming& timing) {
  std::vector<PlanarPath> paths;
  std::vector<std::string> ids;
  for (auto i : members) {
    paths.push_back(g.paths[i]);
    ids.push_back(trips[i].id);
  }
  std::string cache_file;
  if (!opt.cache_dir.empty()) {
    const std::uint64_t key = content_hash(paths, ids);
    char name[40];
    std::snprintf(name, sizeof name, "%016llx.psdm", static_cast<unsigned long long>(key));
    cache_file = (std::filesystem::path(opt.cache_dir) / name).string();
    DistanceMatrix cached;
    if (load_matrix(cache_file, key, cached)) return cached;
    DistanceMatrix m = pairwise_matrix(paths, ids, std::numeric_limits<unsigned long long>::max(),
                                       opt.jobs, &timing);
    std::filesystem::create_directories(opt.cache_dir);
    save_matrix(m, key, cache_file);
    return m;
  }
  return pairwise_matrix(paths, ids, std::numeric_limits<unsigned long long>::max(), opt.jobs,
                         &timing);
}

}  // namespace detail

/// Clustering detector: trips are grouped by O-D cell pair; within each
/// group (train and test trips together) the pairwise Frechet matrix is
/// clustered and every test trip receives its k-distance score.
///
/// The total pair count over all groups is checked against the budget
/// before any distance is computed.
inline DbscanDetectResult dbscan_detect(const std::vector<UnlabeledTrip>& trips, const BBox& bbox,
                                        const GeoPoint& origin, const DbscanDetectOptions& opt) {
  opt.params.validate();
  const auto g = detail::group_trips(trips, bbox, origin, opt.cell_side);
  unsigned long long pairs = 0;
  for (const auto& [key, members] : g.groups) pairs += pair_count(members.size());
  check_pair_budget(pairs, opt.pair_budget);

  DbscanDetectResult res;
  res.groups = g.groups.size();
  std::vector<std::size_t> slot(trips.size(), 0);
  std::vector<std::pair<std::size_t, ScoredTrip>> scored;
  std::vector<std::vector<double>> nbs(trips.size());
  for (const auto& [key, members] : g.groups) {
    const bool has_test = std::any_of(members.begin(), members.end(),
                                      [&](auto i) { return trips[i].split == Split::Test; });
    const DistanceMatrix m = detail::group_matrix(g, members, trips, opt, res.timing);
    const auto clusters = dbscan(m, opt.params);
    res.clusters += static_cast<std::size_t>(clusters.n_clusters);
    res.noise_trips += clusters.noise_count();
    if (!has_test) continue;
    for (std::size_t local = 0; local < members.size(); ++local) {
      const std::size_t i = members[local];
      if (trips[i].split != Split::Test) continue;
      nbs[i] = sorted_neighbour_distances(m, local);
      const double s = kth_distance(nbs[i], opt.params.k());
      if (std::isinf(s)) ++res.sentinel_scores;
      scored.push_back({i, ScoredTrip{trips[i].id, Label::Normal, s, g.keys[i]}});
    }
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [i, s] : scored) {
    res.scores.push_back(std::move(s));
    res.neighbours.push_back(std::move(nbs[i]));
  }
  return res;
}

inline DbscanDetectResult dbscan_detect(const Corpus& c, const DbscanDetectOptions& opt) {
  return dbscan_detect(strip_labels(c), c.bbox, c.projection_origin, opt);
}

/// Re-scores with a different neighbour rank without recomputing distances.
inline std::vector<ScoredTrip> rescore(const DbscanDetectResult& r, int k) {
  std::vector<ScoredTrip> out = r.scores;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].score = kth_distance(r.neighbours[i], k);
  return out;
}

struct MinPtsCalibration {
  int best_min_pts = 2;
  std::vector<std::pair<int, double>> auc_by_min_pts;
};

/// Picks min_pts (used as the score rank) maximising AUC on a calibration
/// slice: `normals` are train trips scored against their own O-D group
/// (themselves excluded); `probes` are fabricated trips scored against the
/// group their endpoints fall in. Ties go to the smaller min_pts.
inline MinPtsCalibration calibrate_min_pts(const Corpus& perturbed,
                                           const std::vector<Trajectory>& probes,
                                           const std::vector<int>& candidates, double cell_side) {
  if (candidates.empty()) throw ValidationError("calibrate_min_pts: no candidates");
  const auto trips = strip_labels(perturbed);
  const auto g = detail::group_trips(trips, perturbed.bbox, perturbed.projection_origin, cell_side);
  const CellLattice lattice(perturbed.bbox, perturbed.projection_origin, cell_side);
  const int kmax = *std::max_element(candidates.begin(), candidates.end());

  std::vector<std::vector<double>> normal_nb;
  std::vector<std::vector<double>> probe_nb;
  auto nearest = [&](const PlanarPath& q, const std::vector<std::size_t>& members,
                     std::size_t skip) {
    std::vector<double> d;
    for (auto j : members) {
      if (j != skip) d.push_back(discrete_frechet(q, g.paths[j]));
    }
    std::sort(d.begin(), d.end());
    if (d.size() > static_cast<std::size_t>(kmax)) d.resize(static_cast<std::size_t>(kmax));
    return d;
  };
  for (const auto& [key, members] : g.groups) {
    for (auto i : members) {
      if (trips[i].split == Split::Train) normal_nb.push_back(nearest(g.paths[i], members, i));
    }
  }
  for (const auto& p : probes) {
    const auto it = g.groups.find(lattice.key(p));
    const PlanarPath path = to_planar(p, perturbed.projection_origin);
    probe_nb.push_back(it == g.groups.end() ? std::vector<double>{}
                                            : nearest(path, it->second, trips.size()));
  }

  MinPtsCalibration out;
  double best = -1.0;
  for (int k : candidates) {
    std::vector<ScoredTrip> s;
    for (const auto& nb : normal_nb) s.push_back({"", Label::Normal, kth_distance(nb, k), ""});
    for (const auto& nb : probe_nb) s.push_back({"", Label::Malicious, kth_distance(nb, k), ""});
    const double auc = (normal_nb.empty() || probe_nb.empty()) ? 0.5 : roc(s).auc;
    out.auc_by_min_pts.push_back({k, auc});
    if (auc > best) {
      best = auc;
      out.best_min_pts = k;
    }
  }
  return out;
}

}  // namespace privsec
