#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "privsec/csv.hpp"
#include "privsec/error.hpp"
#include "privsec/experiment.hpp"
#include "privsec/roc.hpp"

namespace privsec {

namespace detail {

inline std::string fmt(double v, int digits = 3) { return csv::fmt_double(v, digits); }

inline std::string privacy_row_label(const PrivacySetting& p) {
  switch (p.mode) {
    case PrivacyMode::None: return "None";
    case PrivacyMode::LocationBased: return "Location-based, eps=" + fmt(p.epsilon, 3);
    case PrivacyMode::TrajectoryBased: return "Trajectory-based, eps=" + fmt(p.epsilon, 3);
  }
  return "?";
}

// Mean AUC over the intents of one (detector, privacy, od) slice.
inline std::optional<double> mean_auc(const std::vector<CellResult>& cells, DetectorKind d,
                                      const PrivacySetting& p, OdMode od) {
  double s = 0.0;
  int n = 0;
  for (const auto& c : cells) {
    if (c.detector == d && c.privacy == p && c.od_mode == od && c.auc) {
      s += *c.auc;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / n;
}

inline bool any_na(const std::vector<CellResult>& cells, DetectorKind d, const PrivacySetting& p) {
  for (const auto& c : cells) {
    if (c.detector == d && c.privacy == p && c.status == "n/a") return true;
  }
  return false;
}

}  // namespace detail

/// Markdown summary rendered from result rows only.
inline std::string render_summary(const std::vector<CellResult>& cells) {
  std::vector<PrivacySetting> privacy;
  std::vector<DetectorKind> detectors;
  std::vector<Intent> intents;
  std::vector<OdMode> ods;
  for (const auto& c : cells) {
    auto add = [](auto& v, const auto& x) {
      if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
    };
    add(privacy, c.privacy);
    add(detectors, c.detector);
    add(intents, c.intent);
    add(ods, c.od_mode);
  }
  std::sort(privacy.begin(), privacy.end());
  std::sort(detectors.begin(), detectors.end());
  std::sort(intents.begin(), intents.end());
  std::sort(ods.begin(), ods.end());
  const OdMode main_od = ods.front();

  std::ostringstream md;
  md << "# Privacy vs. anomaly detection\n\n";
  md << "Epsilon is per reported point in 1/m; the planar Laplace noise has mean radius 2/eps "
        "(eps=0.1: 20 m, eps=0.01: 200 m).\n\n";

  md << "## Detector x privacy (mean AUC over intents, " << to_string(main_od) << " O-D)\n\n";
  md << "| Privacy |";
  for (auto d : detectors) md << " " << to_string(d) << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < detectors.size(); ++i) md << "---|";
  md << "\n";
  for (const auto& p : privacy) {
    md << "| " << detail::privacy_row_label(p) << " |";
    for (auto d : detectors) {
      const auto auc = detail::mean_auc(cells, d, p, main_od);
      if (!auc) {
        md << (detail::any_na(cells, d, p) ? " N/A (offline detector) |" : " failed |");
        continue;
      }
      md << " " << detail::fmt(*auc);
      const auto base = detail::mean_auc(cells, d, PrivacySetting{}, main_od);
      if (p.mode == PrivacyMode::None) {
        md << " (baseline)";
      } else if (base && *base > 0) {
        const double drop = (*base - *auc) / *base;
        md << " (" << (drop >= 0 ? "-" : "+") << detail::fmt(std::abs(drop) * 100, 1) << "%, "
           << (drop > 0.05 ? "degraded" : drop > 0.01 ? "slightly degraded" : "maintained") << ")";
      }
      md << " |";
    }
    md << "\n";
  }

  {
    const PrivacySetting loc01{PrivacyMode::LocationBased, 0.1};
    const auto a = detail::mean_auc(cells, DetectorKind::Dbscan, loc01, main_od);
    const auto b = detail::mean_auc(cells, DetectorKind::Seq, loc01, main_od);
    md << "\n| Check | Outcome |\n|---|---|\n";
    md << "| AUC(dbscan, eps=0.1) < AUC(seq, eps=0.1) | ";
    if (a && b) {
      md << (*a < *b ? "yes" : "no") << " (" << detail::fmt(*a) << " vs " << detail::fmt(*b) << ") |\n";
    } else {
      md << "not available |\n";
    }
  }

  md << "\n## Cells\n\n| Detector | Privacy | c (m) | q | O-D | AUC | Status |\n"
        "|---|---|---|---|---|---|---|\n";
  for (const auto& c : cells) {
    md << "| " << to_string(c.detector) << " | " << detail::privacy_row_label(c.privacy) << " | "
       << detail::fmt(c.intent.c, 0) << " | " << detail::fmt(c.intent.q, 2) << " | "
       << to_string(c.od_mode) << " | " << (c.auc ? detail::fmt(*c.auc) : "") << " | " << c.status
       << " |\n";
  }

  const auto od = od_sensitivity(cells);
  if (!od.empty()) {
    md << "\n## O-D sensitivity (AUC shifted - AUC same)\n\n"
          "| Detector | Privacy | c (m) | q | same | shifted | gap |\n|---|---|---|---|---|---|---|\n";
    for (const auto& r : od) {
      md << "| " << to_string(r.detector) << " | " << detail::privacy_row_label(r.privacy) << " | "
         << detail::fmt(r.intent.c, 0) << " | " << detail::fmt(r.intent.q, 2) << " | "
         << detail::fmt(r.auc_same) << " | " << detail::fmt(r.auc_shifted) << " | "
         << detail::fmt(r.gap()) << " |\n";
    }
  }
  return md.str();
}

struct RocCurve {
  std::string label;
  std::vector<RocPoint> points;
  std::string color;
  bool dashed = false;
};

/// One ROC panel as a standalone SVG document.
inline std::string render_roc_svg(const std::string& title, const std::vector<RocCurve>& curves) {
  const int W = 520, H = 400, L = 50, T = 30, S = 300;  // plot square S x S at (L, T)
  std::ostringstream s;
  auto X = [&](double f) { return detail::fmt(L + f * S, 2); };
  auto Y = [&](double t) { return detail::fmt(T + (1 - t) * S, 2); };
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << " " << H << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << L + S / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"12\">" << title
    << "</text>\n";
  for (int k = 0; k <= 5; ++k) {
    const double v = k / 5.0;
    s << "<line x1=\"" << X(v) << "\" y1=\"" << Y(0) << "\" x2=\"" << X(v) << "\" y2=\"" << Y(1)
      << "\" stroke=\"#e0e0e0\"/>\n";
    s << "<line x1=\"" << X(0) << "\" y1=\"" << Y(v) << "\" x2=\"" << X(1) << "\" y2=\"" << Y(v)
      << "\" stroke=\"#e0e0e0\"/>\n";
    s << "<text x=\"" << X(v) << "\" y=\"" << T + S + 14 << "\" text-anchor=\"middle\">"
      << detail::fmt(v, 1) << "</text>\n";
    s << "<text x=\"" << L - 6 << "\" y=\"" << Y(v) << "\" text-anchor=\"end\" dy=\"3\">"
      << detail::fmt(v, 1) << "</text>\n";
  }
  s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << S << "\" height=\"" << S
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << X(0) << "\" y1=\"" << Y(0) << "\" x2=\"" << X(1) << "\" y2=\"" << Y(1)
    << "\" stroke=\"#999\" stroke-dasharray=\"2,3\"/>\n";
  s << "<text x=\"" << L + S / 2 << "\" y=\"" << T + S + 30 << "\" text-anchor=\"middle\">False positive rate</text>\n";
  s << "<text x=\"14\" y=\"" << T + S / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << T + S / 2 << ")\">True positive rate</text>\n";
  int row = 0;
  for (const auto& c : curves) {
    s << "<polyline fill=\"none\" stroke=\"" << c.color << "\" stroke-width=\"1.5\""
      << (c.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      s << (i ? " " : "") << X(c.points[i].fpr) << "," << Y(c.points[i].tpr);
    }
    s << "\"/>\n";
    const int ly = T + 8 + row * 13;
    s << "<line x1=\"" << L + S + 10 << "\" y1=\"" << ly << "\" x2=\"" << L + S + 28 << "\" y2=\""
      << ly << "\" stroke=\"" << c.color << "\" stroke-width=\"1.5\""
      << (c.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
    s << "<text x=\"" << L + S + 32 << "\" y=\"" << ly + 3 << "\" font-size=\"8\">" << c.label
      << "</text>\n";
    ++row;
  }
  s << "</svg>\n";
  return s.str();
}

inline std::string panel_file_name(const Intent& i) {
  return "roc_c" + csv::fmt_double(i.c, 0) + "_q" + csv::fmt_double(i.q, 2) + ".svg";
}

/// Re-renders summary.md and one ROC panel per intent from the CSVs in
/// `dir`. Returns the panel files written.
inline std::vector<std::string> write_report(const std::filesystem::path& dir) {
  const auto cells = read_results(dir);
  if (cells.empty()) throw IoError((dir / "results.csv").string() + ": no result rows");
  {
    auto out = csv::open_out((dir / "summary.md").string());
    out << render_summary(cells);
    if (!out) throw IoError("write failed: summary.md");
  }

  const char* palette[] = {"#000000", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};
  std::map<PrivacySetting, std::string> color;
  for (const auto& c : cells) {
    if (!color.count(c.privacy)) color[c.privacy] = "";
  }
  std::size_t k = 0;
  for (auto& [p, col] : color) col = palette[k++ % 10];

  std::map<Intent, std::vector<RocCurve>> panels;
  for (const auto& c : cells) {
    panels[c.intent];
    if (!c.auc) continue;
    const auto roc_path = dir / "roc" / (c.cell_name() + ".csv");
    if (!std::filesystem::exists(roc_path)) throw IoError("missing " + roc_path.string());
    RocCurve curve;
    curve.label = std::string(to_string(c.detector)) + " " + c.privacy.label() + " " +
                  to_string(c.od_mode) + " (" + detail::fmt(*c.auc) + ")";
    curve.points = read_roc_points(roc_path.string());
    curve.color = color[c.privacy];
    curve.dashed = c.detector == DetectorKind::Seq;
    panels[c.intent].push_back(std::move(curve));
  }
  std::vector<std::string> files;
  for (const auto& [intent, curves] : panels) {
    const std::string name = panel_file_name(intent);
    auto out = csv::open_out((dir / name).string());
    out << render_roc_svg("ROC, c = " + detail::fmt(intent.c, 0) + " m, q = " + detail::fmt(intent.q, 2),
                          curves);
    if (!out) throw IoError("write failed: " + name);
    files.push_back(name);
  }
  return files;
}

}  // namespace privsec
