#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "privsec/csv.hpp"
#include "privsec/error.hpp"
#include "privsec/trajectory.hpp"

namespace privsec {

inline constexpr int kDefaultMinPoints = 25;

struct IngestStats {
  std::size_t rows = 0;
  std::size_t kept = 0;
  std::size_t dropped_missing = 0;
  std::size_t dropped_short = 0;
  std::size_t malformed = 0;  // warnings: rows that could not be parsed
  std::size_t dropped() const { return dropped_missing + dropped_short + malformed; }
};

struct IngestResult {
  Corpus corpus;
  IngestStats stats;
};

/// Parses a POLYLINE string such as "[[-8.61,41.14],[-8.62,41.15]]".
/// Returns false on any syntax or range problem.
inline bool parse_polyline(const std::string& text, std::vector<GeoPoint>& out) {
  out.clear();
  const auto j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_array()) return false;
  out.reserve(j.size());
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
      return false;
    }
    GeoPoint p{pair[0].get<double>(), pair[1].get<double>()};
    if (!p.valid()) return false;
    out.push_back(p);
  }
  return true;
}

inline std::string format_polyline(const std::vector<GeoPoint>& pts) {
  std::string s = "[";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) s += ",";
    s += "[" + csv::fmt_double(pts[i].lon) + "," + csv::fmt_double(pts[i].lat) + "]";
  }
  s += "]";
  return s;
}

/// Reads a corpus in the Porto taxi CSV schema.
///
/// Rows flagged MISSING_DATA=True and rows whose polyline has not strictly
/// more than `min_points` points are dropped; unparsable rows are skipped and
/// counted as malformed. Optional LABEL and SPLIT columns (written by this
/// library) are honoured. The bbox and projection origin come from the data.
inline IngestResult ingest_porto(const std::string& path, int min_points = kDefaultMinPoints) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  std::vector<std::string> fields;
  if (!csv::read_record(in, fields)) throw ValidationError(path + ": empty file");
  const csv::Header header(fields);
  const std::size_t c_id = header.require("TRIP_ID", path);
  const std::size_t c_missing = header.require("MISSING_DATA", path);
  const std::size_t c_poly = header.require("POLYLINE", path);
  const auto c_label = header.find("LABEL");
  const auto c_split = header.find("SPLIT");

  IngestResult result;
  std::vector<Trajectory> trips;
  std::vector<GeoPoint> pts;
  while (csv::read_record(in, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    ++result.stats.rows;
    if (fields.size() != header.size()) {
      ++result.stats.malformed;
      continue;
    }
    const std::string& missing = fields[c_missing];
    if (missing == "True") {
      ++result.stats.dropped_missing;
      continue;
    }
    if (missing != "False" || !parse_polyline(fields[c_poly], pts) || pts.empty()) {
      ++result.stats.malformed;
      continue;
    }
    if (static_cast<int>(pts.size()) <= min_points || pts.size() < 2) {
      ++result.stats.dropped_short;
      continue;
    }
    Trajectory t;
    t.id = fields[c_id];
    t.points = pts;
    if (c_label) {
      const auto& v = fields[*c_label];
      if (v == "malicious") {
        t.label = Label::Malicious;
      } else if (v != "normal" && !v.empty()) {
        ++result.stats.malformed;
        continue;
      }
    }
    if (c_split) {
      const auto& v = fields[*c_split];
      if (v == "test") {
        t.split = Split::Test;
      } else if (v != "train" && !v.empty()) {
        ++result.stats.malformed;
        continue;
      }
    }
    trips.push_back(std::move(t));
  }
  result.stats.kept = trips.size();
  result.corpus = Corpus::from_trajectories(std::move(trips));
  return result;
}

inline std::string meta_path(const std::string& csv_path) { return csv_path + ".meta.json"; }

/// Writes the corpus in Porto schema plus LABEL/SPLIT columns, and a
/// `<path>.meta.json` sidecar carrying bbox and projection origin.
inline void write_corpus(const Corpus& c, const std::string& path) {
  {
    auto out = csv::open_out(path);
    out << "\"TRIP_ID\",\"CALL_TYPE\",\"ORIGIN_CALL\",\"ORIGIN_STAND\",\"TAXI_ID\","
           "\"TIMESTAMP\",\"DAY_TYPE\",\"MISSING_DATA\",\"POLYLINE\",\"LABEL\",\"SPLIT\"\n";
    for (const auto& t : c.trajectories) {
      out << csv::quote(t.id) << ",\"C\",\"\",\"\",\"0\",\"0\",\"A\",\"False\","
          << csv::quote(format_polyline(t.points)) << "," << csv::quote(to_string(t.label)) << ","
          << csv::quote(to_string(t.split)) << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
  }
  nlohmann::ordered_json meta;
  meta["bbox"] = {{"min_lon", c.bbox.min_lon}, {"min_lat", c.bbox.min_lat},
                  {"max_lon", c.bbox.max_lon}, {"max_lat", c.bbox.max_lat}};
  meta["projection_origin"] = {{"lon", c.projection_origin.lon}, {"lat", c.projection_origin.lat}};
  auto out = csv::open_out(meta_path(path));
  out << meta.dump(2) << "\n";
}

/// Reads a corpus written by write_corpus (or any Porto-schema file). No
/// point-count filter beyond n >= 2; the sidecar, when present, restores the
/// original feasibility region.
inline IngestResult read_corpus(const std::string& path, int min_points = 1) {
  IngestResult r = ingest_porto(path, min_points);
  const std::string mp = meta_path(path);
  if (std::filesystem::exists(mp)) {
    std::ifstream in(mp);
    const auto meta = nlohmann::json::parse(in, nullptr, false);
    if (meta.is_discarded()) throw ValidationError(mp + ": invalid JSON");
    try {
      const auto& b = meta.at("bbox");
      r.corpus.bbox = {b.at("min_lon").get<double>(), b.at("min_lat").get<double>(),
                       b.at("max_lon").get<double>(), b.at("max_lat").get<double>()};
      const auto& o = meta.at("projection_origin");
      r.corpus.projection_origin = {o.at("lon").get<double>(), o.at("lat").get<double>()};
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(mp + ": " + e.what());
    }
  }
  return r;
}

}  // namespace privsec
