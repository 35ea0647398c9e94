#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "privsec/error.hpp"
#include "privsec/geo.hpp"
#include "privsec/rng.hpp"
#include "privsec/trajectory.hpp"

namespace privsec {

/// Discrete Frechet distance by the coupling-table recurrence, keeping one
/// row of the table (length min(|a|, |b|)).
inline double discrete_frechet(const PlanarPath& a, const PlanarPath& b) {
  if (a.empty() || b.empty()) throw ValidationError("discrete_frechet: empty trajectory");
  const PlanarPath& outer = a.size() >= b.size() ? a : b;
  const PlanarPath& inner = a.size() >= b.size() ? b : a;
  const std::size_t m = inner.size();
  std::vector<double> row(m);
  row[0] = distance(outer[0], inner[0]);
  for (std::size_t j = 1; j < m; ++j) row[j] = std::max(row[j - 1], distance(outer[0], inner[j]));
  for (std::size_t i = 1; i < outer.size(); ++i) {
    double diag = row[0];  // ca(i-1, j-1) for the next column
    row[0] = std::max(row[0], distance(outer[i], inner[0]));
    for (std::size_t j = 1; j < m; ++j) {
      const double up = row[j];
      row[j] = std::max(distance(outer[i], inner[j]), std::min({up, diag, row[j - 1]}));
      diag = up;
    }
  }
  return row[m - 1];
}

inline double discrete_frechet(const Trajectory& a, const Trajectory& b, const GeoPoint& origin) {
  return discrete_frechet(to_planar(a, origin), to_planar(b, origin));
}

/// Exact minimum over all monotone couplings by exhaustive enumeration.
/// Test oracle; limited to |a| * |b| <= 64.
inline double brute_force_frechet(const PlanarPath& a, const PlanarPath& b) {
  if (a.empty() || b.empty()) throw ValidationError("brute_force_frechet: empty trajectory");
  if (a.size() * b.size() > 64) {
    throw ValidationError("brute_force_frechet: |a|*|b| exceeds 64");
  }
  double best = std::numeric_limits<double>::infinity();
  // Depth-first walk over lattice paths from (0,0) to (n-1,m-1).
  auto walk = [&](auto&& self, std::size_t i, std::size_t j, double worst) -> void {
    worst = std::max(worst, distance(a[i], b[j]));
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, worst);
      return;
    }
    if (i + 1 < a.size()) self(self, i + 1, j, worst);
    if (j + 1 < b.size()) self(self, i, j + 1, worst);
    if (i + 1 < a.size() && j + 1 < b.size()) self(self, i + 1, j + 1, worst);
  };
  walk(walk, 0, 0, 0.0);
  return best;
}

/// Symmetric matrix of pairwise distances (meters) with zero diagonal.
struct DistanceMatrix {
  std::vector<std::string> ids;
  std::vector<double> values;  // row-major n x n

  std::size_t n() const { return ids.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * n() + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * n() + j]; }

  static DistanceMatrix zeros(std::vector<std::string> ids) {
    DistanceMatrix m;
    m.values.assign(ids.size() * ids.size(), 0.0);
    m.ids = std::move(ids);
    return m;
  }
};

inline unsigned long long pair_count(std::size_t n) {
  return static_cast<unsigned long long>(n) * (n > 0 ? n - 1 : 0) / 2;
}

struct PairwiseTiming {
  unsigned long long pairs = 0;
  double seconds = 0.0;
  double seconds_per_1k_pairs() const { return pairs ? seconds * 1000.0 / static_cast<double>(pairs) : 0.0; }
};

inline void check_pair_budget(unsigned long long required, unsigned long long budget) {
  if (required > budget) {
    throw BudgetExceeded("pairwise distance budget exceeded: " + std::to_string(required) +
                             " pairs required, " + std::to_string(budget) + " allowed",
                         required, budget);
  }
}

/// All n(n-1)/2 Frechet distances. Refuses with BudgetExceeded when the pair
/// count exceeds `max_pairs_budget`. Rows are distributed over `jobs`
/// threads; each entry is written by exactly one thread.
inline DistanceMatrix pairwise_matrix(const std::vector<PlanarPath>& paths,
                                      std::vector<std::string> ids,
                                      unsigned long long max_pairs_budget, unsigned jobs = 1,
                                      PairwiseTiming* timing = nullptr) {
  if (paths.empty()) throw ValidationError("pairwise_matrix: no trips");
  if (paths.size() != ids.size()) throw ValidationError("pairwise_matrix: ids/paths mismatch");
  const std::size_t n = paths.size();
  check_pair_budget(pair_count(n), max_pairs_budget);
  const auto t0 = std::chrono::steady_clock::now();
  DistanceMatrix m = DistanceMatrix::zeros(std::move(ids));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = discrete_frechet(paths[i], paths[j]);
        m.at(i, j) = d;
        m.at(j, i) = d;
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (timing) {
    timing->pairs += pair_count(n);
    timing->seconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Matrix cache: binary file keyed by a hash of the trip ids and coordinates.

inline std::uint64_t content_hash(const std::vector<PlanarPath>& paths,
                                  const std::vector<std::string>& ids) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    h = fnv1a(ids[k], h);
    for (const auto& p : paths[k]) {
      double xy[2] = {p.x, p.y};
      h = fnv1a(std::string_view(reinterpret_cast<const char*>(xy), sizeof xy), h);
    }
  }
  return h;
}

inline constexpr char kMatrixMagic[8] = {'P', 'S', 'D', 'M', 'A', 'T', '0', '1'};

inline void save_matrix(const DistanceMatrix& m, std::uint64_t key, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMatrixMagic, sizeof kMatrixMagic);
  const std::uint64_t n = m.n();
  out.write(reinterpret_cast<const char*>(&key), sizeof key);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (const auto& id : m.ids) {
    const std::uint64_t len = id.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(id.data(), static_cast<std::streamsize>(len));
  }
  out.write(reinterpret_cast<const char*>(m.values.data()),
            static_cast<std::streamsize>(m.values.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path);
}

/// Loads a cached matrix. Returns false when the file is missing, corrupt or
/// was computed for different content.
inline bool load_matrix(const std::string& path, std::uint64_t key, DistanceMatrix& m) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[8];
  std::uint64_t stored = 0, n = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&stored), sizeof stored);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || std::memcmp(magic, kMatrixMagic, sizeof magic) != 0 || stored != key || n > (1u << 20)) {
    return false;
  }
  DistanceMatrix out;
  out.ids.resize(n);
  for (auto& id : out.ids) {
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || len > 4096) return false;
    id.resize(len);
    in.read(id.data(), static_cast<std::streamsize>(len));
  }
  out.values.resize(n * n);
  in.read(reinterpret_cast<char*>(out.values.data()),
          static_cast<std::streamsize>(out.values.size() * sizeof(double)));
  if (!in) return false;
  m = std::move(out);
  return true;
}

}  // namespace privsec
