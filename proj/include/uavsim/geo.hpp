#pragma once

// Planar coordinate frames and angle arithmetic shared by every module.
// The simulation uses a flat-earth conversion with a single meters-per-degree
// scale on both axes (default 111 km/deg); altitude is carried but never
// estimated or attacked.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace uavsim::geo {

inline constexpr double kDefaultMetersPerDegree = 111000.0;

struct GeoCoord {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double alt_m = 0.0;

  [[nodiscard]] bool valid() const {
    return std::isfinite(lat_deg) && std::isfinite(lon_deg) &&
           std::isfinite(alt_m) && lat_deg >= -90.0 && lat_deg <= 90.0 &&
           lon_deg > -180.0 && lon_deg <= 180.0;
  }
};

struct LocalPos {
  double x_east_m = 0.0;
  double y_north_m = 0.0;

  friend LocalPos operator+(LocalPos a, LocalPos b) {
    return {a.x_east_m + b.x_east_m, a.y_north_m + b.y_north_m};
  }
  friend LocalPos operator-(LocalPos a, LocalPos b) {
    return {a.x_east_m - b.x_east_m, a.y_north_m - b.y_north_m};
  }
  friend LocalPos operator*(double s, LocalPos p) {
    return {s * p.x_east_m, s * p.y_north_m};
  }
  [[nodiscard]] double norm() const { return std::hypot(x_east_m, y_north_m); }
};

struct FlatEarthFrame {
  GeoCoord origin{};
  double meters_per_degree = kDefaultMetersPerDegree;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  constexpr double two_pi = 2.0 * pi;
  double r = std::fmod(a, two_pi);
  if (r <= -pi) r += two_pi;
  if (r > pi) r -= two_pi;
  return r;
}

inline LocalPos geodetic_to_local(const GeoCoord& c, const FlatEarthFrame& f) {
  return {(c.lon_deg - f.origin.lon_deg) * f.meters_per_degree,
          (c.lat_deg - f.origin.lat_deg) * f.meters_per_degree};
}

inline GeoCoord local_to_geodetic(const LocalPos& p, const FlatEarthFrame& f) {
  return {f.origin.lat_deg + p.y_north_m / f.meters_per_degree,
          f.origin.lon_deg + p.x_east_m / f.meters_per_degree,
          f.origin.alt_m};
}

}  // namespace uavsim::geo
