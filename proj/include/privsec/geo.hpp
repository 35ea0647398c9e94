#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace privsec {

inline constexpr double kEarthRadiusM = 6'371'000.0;

struct GeoPoint {
  double lon = 0.0;  // degrees, WGS84
  double lat = 0.0;  // degrees, WGS84

  bool valid() const {
    return std::isfinite(lon) && std::isfinite(lat) && lon >= -180.0 && lon <= 180.0 &&
           lat >= -90.0 && lat <= 90.0;
  }
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Meters east (x) and north (y) of a projection origin.
struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PlanarPoint&, const PlanarPoint&) = default;
  PlanarPoint operator+(const PlanarPoint& o) const { return {x + o.x, y + o.y}; }
  PlanarPoint operator-(const PlanarPoint& o) const { return {x - o.x, y - o.y}; }
  PlanarPoint operator*(double s) const { return {x * s, y * s}; }
};

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

inline double distance(const PlanarPoint& a, const PlanarPoint& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Great-circle distance in meters.
inline double haversine(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dphi = phi2 - phi1;
  const double dlambda = deg2rad(b.lon - a.lon);
  const double s = std::sin(dphi / 2) * std::sin(dphi / 2) +
                   std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) * std::sin(dlambda / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(s)));
}

/// Local equirectangular projection around `origin`. Sub-meter accurate
/// within a few tens of kilometres of the origin.
inline PlanarPoint project(const GeoPoint& p, const GeoPoint& origin) {
  const double k = std::cos(deg2rad(origin.lat));
  return {kEarthRadiusM * deg2rad(p.lon - origin.lon) * k,
          kEarthRadiusM * deg2rad(p.lat - origin.lat)};
}

inline GeoPoint unproject(const PlanarPoint& p, const GeoPoint& origin) {
  const double k = std::cos(deg2rad(origin.lat));
  return {origin.lon + rad2deg(p.x / (kEarthRadiusM * k)),
          origin.lat + rad2deg(p.y / kEarthRadiusM)};
}

struct BBox {
  double min_lon = 0.0;
  double min_lat = 0.0;
  double max_lon = 0.0;
  double max_lat = 0.0;

  bool contains(const GeoPoint& p) const {
    return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
  }
  bool degenerate() const { return !(max_lon > min_lon) || !(max_lat > min_lat); }
  GeoPoint centroid() const { return {(min_lon + max_lon) / 2, (min_lat + max_lat) / 2}; }
  GeoPoint min_corner() const { return {min_lon, min_lat}; }
  GeoPoint max_corner() const { return {max_lon, max_lat}; }
  GeoPoint clamp(const GeoPoint& p) const {
    return {std::clamp(p.lon, min_lon, max_lon), std::clamp(p.lat, min_lat, max_lat)};
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

}  // namespace privsec
