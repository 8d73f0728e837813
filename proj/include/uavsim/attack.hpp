#pragma once

// The attacker: brute-force input search (unconstrained), gate-evading
// incremental spoofing, the constrained potential-field collision attack, and
// envelope measurement tools built on the estimator.

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "uavsim/estimator.hpp"
#include "uavsim/geo.hpp"
#include "uavsim/policy.hpp"
#include "uavsim/world.hpp"

namespace uavsim::attack {

using geo::LocalPos;
using geo::wrap_angle;
using policy::PolicyObservation;
using world::Action;
using world::UavState;

struct DegenerateDirection : std::runtime_error {
  DegenerateDirection() : std::runtime_error("collision point equals the target") {}
};
struct NeverConverges : std::runtime_error {
  NeverConverges() : std::runtime_error("estimate never absorbed the offset (gated out)") {}
};

enum class SpoofMode { Unconstrained, Constrained };

/// Direction convention for the constrained attack's per-step vector.
/// ObstacleMinusTarget follows the published algorithm literally; in closed
/// loop it walks the perceived goal away from the obstacle. TargetMinusObstacle
/// walks the point the vehicle is steered toward from the target down into the
/// obstacle, which is the variant that actually induces collisions.
/// ObstacleMinusUav aims the per-step vector from the vehicle at the obstacle.
enum class SpoofHeading { ObstacleMinusTarget, TargetMinusObstacle, ObstacleMinusUav };

struct SpoofDirective {
  LocalPos delta_p{};
  int repeats_T = 1;
  SpoofMode mode = SpoofMode::Constrained;
};

struct AttackState {
  long n = 0;
  LocalPos cumulative{};
  LocalPos observed_truth{};
};

struct SearchGrid {
  double radius_P = 50.0;  // m
  double resolution = 1.0;  // m
};

inline constexpr double kDefaultThetaTol = 0.35;  // rad
inline constexpr double kDefaultMaxStep = 0.1;    // m per policy step

inline double bearing(const LocalPos& from, const LocalPos& to) {
  return std::atan2(to.y_north_m - from.y_north_m, to.x_east_m - from.x_east_m);
}

/// True when the action turns the vehicle onto the obstacle at significant
/// speed: post-action heading within theta_tol of the obstacle bearing and
/// commanded speed at least half of v_max.
inline bool condition_collision(const Action& a, const UavState& uav,
                                const LocalPos& obstacle_center,
                                double theta_tol = kDefaultThetaTol,
                                double dt = world::kDefaultDt,
                                double v_max = world::kDefaultVMax) {
  if (a.speed_cmd < 0.5 * v_max) return false;
  const double heading = wrap_angle(uav.yaw + a.yaw_rate_cmd * dt);
  return std::abs(wrap_angle(heading - bearing(uav.pos, obstacle_center))) <= theta_tol;
}

using PolicyFn = std::function<Action(const PolicyObservation&)>;

struct SearchOutcome {
  bool found = false;       // a candidate satisfying condition_collision exists
  LocalPos position{};      // the satisfying candidate (valid when found)
  double alignment = 0.0;   // |post-action heading - obstacle bearing| of `position`
  LocalPos best_effort{};   // best-aligned candidate ignoring the speed clause
  double best_effort_alignment = 0.0;
};

/// Brute-force grid search over spoofed positions around the truth. Candidates
/// are visited nearest-first; among those satisfying condition_collision the
/// one with the best post-action heading alignment wins, ties broken by
/// smaller spoof magnitude.
inline SearchOutcome unconstrained_search(const PolicyFn& pi, const world::DepthScan& depth,
                                          const UavState& uav, const policy::TargetSpec& tgt,
                                          const SearchGrid& grid,
                                          const LocalPos& obstacle_center,
                                          double theta_tol = kDefaultThetaTol,
                                          double dt = world::kDefaultDt,
                                          double v_max = world::kDefaultVMax) {
  SearchOutcome out;
  const double obs_bearing = bearing(uav.pos, obstacle_center);
  const int n = static_cast<int>(std::floor(grid.radius_P / grid.resolution + 1e-9));
  double best_align = std::numeric_limits<double>::infinity();
  double best_mag = std::numeric_limits<double>::infinity();
  double best_effort_align = std::numeric_limits<double>::infinity();

  for (int ring = 0; ring <= n; ++ring) {
    for (int i = -ring; i <= ring; ++i) {
      for (int j = -ring; j <= ring; ++j) {
        if (std::max(std::abs(i), std::abs(j)) != ring) continue;
        const LocalPos cand = uav.pos + LocalPos{i * grid.resolution, j * grid.resolution};
        policy::Relative rel;
        try {
          rel = policy::compute_rel(cand, uav.yaw, tgt);
        } catch (const policy::DegenerateRelative&) {
          continue;
        }
        const auto obs = policy::make_observation(depth, rel, tgt.d_scale);
        const Action a = pi(obs);
        const double heading = wrap_angle(uav.yaw + a.yaw_rate_cmd * dt);
        const double align = std::abs(wrap_angle(heading - obs_bearing));
        if (align < best_effort_align) {
          best_effort_align = align;
          out.best_effort = cand;
        }
        if (a.speed_cmd >= 0.5 * v_max && align <= theta_tol) {
          const double mag = (cand - uav.pos).norm();
          if (align < best_align - 1e-12 ||
              (std::abs(align - best_align) <= 1e-12 && mag < best_mag)) {
            best_align = align;
            best_mag = mag;
            out.found = true;
            out.position = cand;
            out.alignment = align;
          }
        }
      }
    }
  }
  out.best_effort_alignment = best_effort_align;
  return out;
}

/// Emits the repeats_T spoofed signals for one attack step and advances the
/// attacker's running sum.
inline std::vector<LocalPos> spoof_signal(AttackState& st, const SpoofDirective& directive) {
  std::vector<LocalPos> signals;
  signals.reserve(static_cast<std::size_t>(directive.repeats_T));
  const LocalPos total = st.cumulative + directive.delta_p;
  for (int t = 0; t < directive.repeats_T; ++t) {
    signals.push_back(st.observed_truth + total);
  }
  st.cumulative = total;
  st.n += 1;
  return signals;
}

inline LocalPos constrained_direction(SpoofHeading heading, const LocalPos& pos_col,
                                      const LocalPos& pos_tar,
                                      const LocalPos& pos_uav = {}) {
  LocalPos d;
  switch (heading) {
    case SpoofHeading::ObstacleMinusTarget:
      d = pos_col - pos_tar;
      break;
    case SpoofHeading::TargetMinusObstacle:
      d = pos_tar - pos_col;
      break;
    case SpoofHeading::ObstacleMinusUav:
      d = pos_col - pos_uav;
      break;
  }
  const double norm = d.norm();
  if (norm == 0.0) throw DegenerateDirection{};
  return (1.0 / norm) * d;
}

/// One constrained-attack directive: a step of length step_m along the chosen
/// direction convention.
inline SpoofDirective constrained_step(const LocalPos& pos_col, const LocalPos& pos_tar,
                                       double step_m,
                                       SpoofHeading heading = SpoofHeading::ObstacleMinusTarget,
                                       const LocalPos& pos_uav = {}) {
  SpoofDirective d;
  d.mode = SpoofMode::Constrained;
  d.repeats_T = 1;
  if (step_m == 0.0) {
    d.delta_p = {0.0, 0.0};
    // still validate the direction
    (void)constrained_direction(heading, pos_col, pos_tar, pos_uav);
    return d;
  }
  d.delta_p = step_m * constrained_direction(heading, pos_col, pos_tar, pos_uav);
  return d;
}

struct ReflectionDelay {
  int samples = 0;          // T: samples until 95% of the offset is absorbed
  double max_test_ratio = 0.0;
};

/// Spoofs a stationary truth with a constant offset and measures how many
/// samples the estimator needs to absorb 95% of it.
inline ReflectionDelay measure_reflection_delay(const estimator::FusionConfig& cfg,
                                                const LocalPos& offset,
                                                int max_samples = 1000) {
  const double dt = 1.0 / cfg.gps_rate_hz;
  estimator::EkfEstimate est;
  est.cov = estimator::steady_state_gain(cfg, dt).cov;

  ReflectionDelay out;
  const double norm = offset.norm();
  if (norm == 0.0) return out;

  for (int n = 1; n <= max_samples; ++n) {
    const auto pred = estimator::predict(est, dt, cfg);
    const auto outcome = estimator::fuse_gps(pred, offset, cfg);
    out.max_test_ratio = std::max(out.max_test_ratio, outcome.test_ratio);
    est = outcome.est;
    if (est.pos.norm() >= 0.95 * norm) {
      out.samples = n;
      return out;
    }
  }
  throw NeverConverges{};
}

struct EnvelopeReport {
  double max_rate_mps = 0.0;      // supremum feasible constant drift rate
  double run_max_test_ratio = 0.0;  // over the verification run at that rate
  double run_final_offset_m = 0.0;  // estimate-truth offset at the end
  double run_duration_s = 0.0;
};

namespace detail {

/// Max test ratio over a constant-rate drift run against a stationary truth.
inline std::pair<double, double> drift_run(const estimator::FusionConfig& cfg,
                                           double rate_mps, double duration_s) {
  const double dt = 1.0 / cfg.gps_rate_hz;
  estimator::EkfEstimate est;
  est.cov = estimator::steady_state_gain(cfg, dt).cov;
  double max_ratio = 0.0;
  const int n = static_cast<int>(std::llround(duration_s / dt));
  for (int i = 1; i <= n; ++i) {
    const auto pred = estimator::predict(est, dt, cfg);
    const LocalPos z{0.0, rate_mps * i * dt};
    const auto outcome = estimator::fuse_gps(pred, z, cfg);
    max_ratio = std::max(max_ratio, outcome.test_ratio);
    est = outcome.est;
  }
  return {max_ratio, est.pos.norm()};
}

}  // namespace detail

/// Binary search for the largest constant drift rate that keeps every sample
/// of a 60 s run inside the gate, to 0.01 m/s resolution.
inline EnvelopeReport max_undetected_rate(const estimator::FusionConfig& cfg,
                                          double duration_s = 60.0,
                                          double rate_hi = 8.0) {
  double lo = 0.0, hi = rate_hi;
  while (hi - lo > 0.01) {
    const double mid = 0.5 * (lo + hi);
    const auto [max_ratio, _] = detail::drift_run(cfg, mid, duration_s);
    (max_ratio < 1.0 ? lo : hi) = mid;
  }
  EnvelopeReport out;
  out.max_rate_mps = lo;
  const auto [max_ratio, final_offset] = detail::drift_run(cfg, lo, duration_s);
  out.run_max_test_ratio = max_ratio;
  // truth is stationary at the origin, so the estimate's displacement is the
  // estimate-truth offset the attack achieved
  out.run_final_offset_m = final_offset;
  out.run_duration_s = duration_s;
  return out;
}

}  // namespace uavsim::attack
