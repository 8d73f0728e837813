#pragma once

// Ground-truth planar environment: first-order UAV kinematics, circular
// obstacles, ray-cast depth sensing and collision checks. Everything here is
// a pure function over value types.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "uavsim/geo.hpp"

namespace uavsim::world {

using geo::LocalPos;
using geo::wrap_angle;

inline constexpr double kDefaultVMax = 5.0;          // m/s
inline constexpr double kDefaultOmegaMax = 1.0;      // rad/s
inline constexpr double kDefaultCollisionRadius = 1.0;
inline constexpr double kDefaultGoalRadius = 3.0;
inline constexpr double kDefaultDt = 0.1;            // s
inline constexpr int kDefaultNumRays = 16;
inline constexpr double kDefaultFov = std::numbers::pi / 2.0;
inline constexpr double kDefaultMaxRange = 20.0;     // m

struct UavState {
  LocalPos pos{};
  double yaw = 0.0;    // rad, CCW from +x (east), in (-pi, pi]
  double speed = 0.0;  // m/s
};

struct Circle {
  LocalPos center{};
  double radius = 1.0;
};

struct Rect {
  double min_x = -1e9, min_y = -1e9, max_x = 1e9, max_y = 1e9;
  [[nodiscard]] bool contains(const LocalPos& p) const {
    return p.x_east_m >= min_x && p.x_east_m <= max_x &&
           p.y_north_m >= min_y && p.y_north_m <= max_y;
  }
};

struct Environment {
  std::vector<Circle> obstacles;
  LocalPos target{};
  LocalPos start{};
  double collision_radius = kDefaultCollisionRadius;
  double goal_radius = kDefaultGoalRadius;
  Rect bounds{};
};

struct Action {
  double speed_cmd = 0.0;     // m/s, in [0, v_max]
  double yaw_rate_cmd = 0.0;  // rad/s, in [-omega_max, omega_max]
};

inline Action clamp_action(double speed, double yaw_rate,
                           double v_max = kDefaultVMax,
                           double omega_max = kDefaultOmegaMax) {
  return {std::clamp(speed, 0.0, v_max),
          std::clamp(yaw_rate, -omega_max, omega_max)};
}

struct DepthScan {
  std::vector<double> ranges;  // normalized to [0, 1]
  double fov = kDefaultFov;
  double max_range = kDefaultMaxRange;

  [[nodiscard]] double min_depth() const {
    return *std::min_element(ranges.begin(), ranges.end());
  }
  [[nodiscard]] int min_index() const {
    return static_cast<int>(std::min_element(ranges.begin(), ranges.end()) -
                            ranges.begin());
  }
  /// Bearing of ray i relative to the vehicle heading.
  [[nodiscard]] double ray_bearing(int i) const {
    const int n = static_cast<int>(ranges.size());
    if (n == 1) return 0.0;
    return fov * (static_cast<double>(i) / (n - 1) - 0.5);
  }
};

/// Yaw integrates first, then the position advances along the new heading.
inline UavState step_kinematics(const UavState& s, const Action& a, double dt) {
  UavState out;
  out.yaw = wrap_angle(s.yaw + a.yaw_rate_cmd * dt);
  out.pos = {s.pos.x_east_m + a.speed_cmd * dt * std::cos(out.yaw),
             s.pos.y_north_m + a.speed_cmd * dt * std::sin(out.yaw)};
  out.speed = a.speed_cmd;
  return out;
}

/// Distance along a unit ray from `origin` to the first intersection with a
/// circle, or +inf when the ray misses.
inline double ray_circle_distance(const LocalPos& origin, double bearing,
                                  const Circle& c) {
  const double dx = std::cos(bearing), dy = std::sin(bearing);
  const double ox = c.center.x_east_m - origin.x_east_m;
  const double oy = c.center.y_north_m - origin.y_north_m;
  const double proj = ox * dx + oy * dy;
  const double perp2 = ox * ox + oy * oy - proj * proj;
  const double r2 = c.radius * c.radius;
  if (perp2 > r2) return std::numeric_limits<double>::infinity();
  const double t = proj - std::sqrt(r2 - perp2);
  if (t <= 0.0) return std::numeric_limits<double>::infinity();
  return t;
}

inline DepthScan ray_depth(const UavState& s, const Environment& env,
                           int n_rays = kDefaultNumRays,
                           double fov = kDefaultFov,
                           double max_range = kDefaultMaxRange) {
  DepthScan scan;
  scan.fov = fov;
  scan.max_range = max_range;
  scan.ranges.resize(static_cast<std::size_t>(n_rays), 1.0);
  for (int i = 0; i < n_rays; ++i) {
    const double rel = (n_rays == 1) ? 0.0
                                     : fov * (static_cast<double>(i) / (n_rays - 1) - 0.5);
    const double b = s.yaw + rel;
    double best = max_range;
    for (const auto& c : env.obstacles) {
      best = std::min(best, ray_circle_distance(s.pos, b, c));
    }
    scan.ranges[static_cast<std::size_t>(i)] = std::min(best, max_range) / max_range;
  }
  return scan;
}

struct CollisionCheck {
  bool collided = false;
  double min_dist = std::numeric_limits<double>::infinity();
};

inline CollisionCheck check_collision(const UavState& s, const Environment& env) {
  CollisionCheck out;
  for (const auto& c : env.obstacles) {
    const double d = (s.pos - c.center).norm() - c.radius;
    out.min_dist = std::min(out.min_dist, d);
  }
  out.collided = out.min_dist <= env.collision_radius;
  return out;
}

}  // namespace uavsim::world
