#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "privsec/csv.hpp"
#include "privsec/error.hpp"
#include "privsec/trajectory.hpp"

namespace privsec {

/// Detector output for one trip. Higher score = more anomalous; +inf is the
/// sentinel for trips that cannot be scored against any neighbourhood.
struct ScoredTrip {
  std::string trip_id;
  Label truth = Label::Normal;
  double score = 0.0;
  std::string od_key;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;  // (0,0) ... (1,1), monotone
  double auc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

/// Threshold sweep from the highest score down; equal scores cross the
/// threshold together. AUC by the trapezoid rule over the sweep.
inline RocResult roc(const std::vector<ScoredTrip>& scored) {
  RocResult r;
  for (const auto& s : scored) {
    if (std::isnan(s.score)) throw ValidationError("roc: NaN score for " + s.trip_id);
    (s.truth == Label::Malicious ? r.n_pos : r.n_neg)++;
  }
  if (r.n_pos == 0 || r.n_neg == 0) {
    throw ValidationError("roc: need at least one normal and one malicious trip");
  }
  std::vector<std::pair<double, bool>> v;
  v.reserve(scored.size());
  for (const auto& s : scored) v.emplace_back(s.score, s.truth == Label::Malicious);
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  const double P = static_cast<double>(r.n_pos);
  const double N = static_cast<double>(r.n_neg);
  std::size_t tp = 0, fp = 0;
  r.points.push_back({0.0, 0.0});
  double area = 0.0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j].first == v[i].first) {
      (v[j].second ? tp : fp)++;
      ++j;
    }
    const RocPoint next{static_cast<double>(fp) / N, static_cast<double>(tp) / P};
    const RocPoint& prev = r.points.back();
    area += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) / 2.0;
    r.points.push_back(next);
    i = j;
  }
  r.auc = area;
  return r;
}

inline void write_roc_points(const RocResult& r, const std::string& path) {
  auto out = csv::open_out(path);
  out << "fpr,tpr\n";
  for (const auto& p : r.points) out << csv::fmt_exact(p.fpr) << "," << csv::fmt_exact(p.tpr) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<RocPoint> read_roc_points(const std::string& path) {
  const auto t = csv::read_table(path);
  std::vector<RocPoint> pts;
  for (const auto& row : t.rows) {
    if (row.size() < 2) throw ValidationError(path + ": malformed ROC row");
    pts.push_back({std::stod(row[0]), std::stod(row[1])});
  }
  return pts;
}

/// Scores CSV shared by both detectors.
inline void write_scores(const std::vector<ScoredTrip>& scored, const std::string& path) {
  auto out = csv::open_out(path);
  out << "trip_id,od_key,score_m,label\n";
  for (const auto& s : scored) {
    out << s.trip_id << "," << s.od_key << ","
        << (std::isinf(s.score) ? std::string("inf") : csv::fmt_exact(s.score)) << ","
        << to_string(s.truth) << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace privsec
