#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "privsec/error.hpp"
#include "privsec/geo.hpp"
#include "privsec/lambert_w.hpp"
#include "privsec/rng.hpp"
#include "privsec/trajectory.hpp"

namespace privsec {

enum class PrivacyMode { None, LocationBased, TrajectoryBased };

inline const char* to_string(PrivacyMode m) {
  switch (m) {
    case PrivacyMode::None: return "none";
    case PrivacyMode::LocationBased: return "location";
    case PrivacyMode::TrajectoryBased: return "trajectory";
  }
  return "?";
}

inline PrivacyMode parse_privacy_mode(const std::string& s) {
  if (s == "none") return PrivacyMode::None;
  if (s == "location") return PrivacyMode::LocationBased;
  if (s == "trajectory") return PrivacyMode::TrajectoryBased;
  throw ValidationError("unknown privacy mode '" + s + "' (expected none|location|trajectory)");
}

/// Per-point privacy parameters. `epsilon` is in 1/meters: the mean planar
/// Laplace displacement is 2/epsilon.
struct PrivacyConfig {
  PrivacyMode mode = PrivacyMode::None;
  double epsilon = 0.1;
  double threshold_l = -1.0;   // prediction test radius, meters; < 0 selects 2/epsilon
  double test_fraction = 0.1;  // share of epsilon spent on the prediction test
  std::uint64_t seed = 0;

  double threshold() const { return threshold_l < 0 ? 2.0 / epsilon : threshold_l; }

  void validate() const {
    if (mode == PrivacyMode::None) return;
    if (!(epsilon > 0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be > 0");
    if (mode == PrivacyMode::TrajectoryBased) {
      if (!(test_fraction > 0 && test_fraction < 1)) {
        throw ValidationError("test_fraction must lie in (0, 1)");
      }
      if (std::isnan(threshold_l)) throw ValidationError("threshold_l must be a number");
    }
  }
};

struct PerturbationReport {
  std::size_t n_points = 0;
  std::size_t n_predicted = 0;
  std::vector<double> epsilon_spent_per_point;
};

/// CDF of the planar Laplace radius: 1 - (1 + eps r) e^{-eps r}.
inline double planar_laplace_radius_cdf(double r, double epsilon) {
  if (r <= 0) return 0.0;
  return 1.0 - (1.0 + epsilon * r) * std::exp(-epsilon * r);
}

/// Inverse of the radius CDF at probability p in [0, 1).
inline double planar_laplace_radius(double p, double epsilon) {
  return -(lambert_wm1((p - 1.0) / std::numbers::e) + 1.0) / epsilon;
}

/// Draws from the density eps^2/(2 pi) exp(-eps |z - center|).
inline PlanarPoint planar_laplace_sample(const PlanarPoint& center, double epsilon, Rng& rng) {
  const double theta = 2.0 * std::numbers::pi * rng.uniform();
  const double r = planar_laplace_radius(rng.uniform(), epsilon);
  return {center.x + r * std::cos(theta), center.y + r * std::sin(theta)};
}

inline Rng trip_rng(const PrivacyConfig& cfg, const Trajectory& t) {
  return Rng(derive_seed(cfg.seed, t.id));
}

inline std::pair<Trajectory, PerturbationReport> perturb_location_based(const Trajectory& t,
                                                                        const PrivacyConfig& cfg,
                                                                        const GeoPoint& origin) {
  cfg.validate();
  Trajectory out = t;
  PerturbationReport rep;
  rep.n_points = t.size();
  if (cfg.mode == PrivacyMode::None) return {out, rep};
  Rng rng = trip_rng(cfg, t);
  for (auto& p : out.points) {
    p = unproject(planar_laplace_sample(project(p, origin), cfg.epsilon, rng), origin);
    rep.epsilon_spent_per_point.push_back(cfg.epsilon);
  }
  return {out, rep};
}

/// Prediction-and-test mechanism.
///
/// The prediction for point i is the previously reported point. A noisy
/// distance test (Laplace, budget test_fraction * eps) decides whether the
/// prediction is reported; otherwise a fresh planar Laplace sample with the
/// remaining budget is. The first point always gets fresh noise at full eps.
inline std::pair<Trajectory, PerturbationReport> perturb_trajectory_based(
    const Trajectory& t, const PrivacyConfig& cfg, const GeoPoint& origin) {
  cfg.validate();
  Trajectory out = t;
  PerturbationReport rep;
  rep.n_points = t.size();
  if (cfg.mode == PrivacyMode::None) return {out, rep};
  Rng rng = trip_rng(cfg, t);
  const double eps_test = cfg.test_fraction * cfg.epsilon;
  const double eps_noise = (1.0 - cfg.test_fraction) * cfg.epsilon;
  const double l = cfg.threshold();
  PlanarPoint reported{};
  for (std::size_t i = 0; i < t.size(); ++i) {
    const PlanarPoint truth = project(t.points[i], origin);
    if (i == 0) {
      reported = planar_laplace_sample(truth, cfg.epsilon, rng);
      rep.epsilon_spent_per_point.push_back(cfg.epsilon);
    } else {
      const double noisy_d = distance(truth, reported) + rng.laplace(1.0 / eps_test);
      if (noisy_d <= l) {
        ++rep.n_predicted;
        rep.epsilon_spent_per_point.push_back(eps_test);
      } else {
        reported = planar_laplace_sample(truth, eps_noise, rng);
        rep.epsilon_spent_per_point.push_back(eps_test + eps_noise);
      }
    }
    out.points[i] = unproject(reported, origin);
  }
  return {out, rep};
}

inline std::pair<Trajectory, PerturbationReport> perturb(const Trajectory& t,
                                                         const PrivacyConfig& cfg,
                                                         const GeoPoint& origin) {
  switch (cfg.mode) {
    case PrivacyMode::TrajectoryBased: return perturb_trajectory_based(t, cfg, origin);
    case PrivacyMode::LocationBased: return perturb_location_based(t, cfg, origin);
    case PrivacyMode::None: break;
  }
  PerturbationReport rep;
  rep.n_points = t.size();
  return {t, rep};
}

struct PerturbedCorpus {
  Corpus corpus;
  std::vector<PerturbationReport> reports;  // parallel to corpus.trajectories
};

/// Perturbs every trip; labels, split and the corpus region are kept.
inline PerturbedCorpus perturb_corpus(const Corpus& c, const PrivacyConfig& cfg) {
  cfg.validate();
  PerturbedCorpus out{c.empty_like(), {}};
  out.corpus.trajectories.reserve(c.size());
  out.reports.reserve(c.size());
  for (const auto& t : c.trajectories) {
    auto [pt, rep] = perturb(t, cfg, c.projection_origin);
    out.corpus.trajectories.push_back(std::move(pt));
    out.reports.push_back(std::move(rep));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistical audit of the multiplicative bound K(x)(z) <= e^{eps d(x,x')} K(x')(z).

struct GeoIndAudit {
  double max_violation = 0.0;   // max over bins of |log ratio| - eps d
  double max_abs_log_ratio = 0.0;
  double bound = 0.0;           // eps d
  std::size_t bins_used = 0;
};

/// Samples the mechanism at x = (0,0) and x' = (d,0), histograms both output
/// clouds on a square grid of `bin_m` cells and compares bins where both
/// histograms have at least `min_hits` samples.
inline GeoIndAudit geo_indistinguishability_check(double epsilon, double d, std::size_t n_samples,
                                                  double bin_m, std::size_t min_hits,
                                                  std::uint64_t seed) {
  if (!(epsilon > 0) || d < 0 || n_samples == 0 || !(bin_m > 0)) {
    throw ValidationError("geo_indistinguishability_check: invalid arguments");
  }
  using Bin = std::pair<long, long>;
  auto histogram = [&](PlanarPoint center, std::uint64_t s) {
    std::map<Bin, std::size_t> h;
    Rng rng(s);
    for (std::size_t i = 0; i < n_samples; ++i) {
      const PlanarPoint z = planar_laplace_sample(center, epsilon, rng);
      // Bins are centred on the midpoint of x and x'.
      ++h[{static_cast<long>(std::floor((z.x - d / 2) / bin_m + 0.5)),
           static_cast<long>(std::floor(z.y / bin_m + 0.5))}];
    }
    return h;
  };
  const auto hx = histogram({0.0, 0.0}, derive_seed(seed, "x"));
  const auto hy = histogram({d, 0.0}, derive_seed(seed, "x'"));
  GeoIndAudit audit;
  audit.bound = epsilon * d;
  audit.max_violation = -audit.bound;
  for (const auto& [bin, a] : hx) {
    auto it = hy.find(bin);
    if (it == hy.end() || a < min_hits || it->second < min_hits) continue;
    const double lr = std::abs(std::log(static_cast<double>(a) / static_cast<double>(it->second)));
    audit.max_abs_log_ratio = std::max(audit.max_abs_log_ratio, lr);
    audit.max_violation = std::max(audit.max_violation, lr - audit.bound);
    ++audit.bins_used;
  }
  return audit;
}

}  // namespace privsec
