#pragma once

// Closed-loop scenario runner: GPS channel -> estimator -> policy -> dynamics,
// with the attacker tapping the channel (constrained) or the policy input
// (unconstrained). Also the canned experiment reproductions and file export.

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uavsim/attack.hpp"
#include "uavsim/config.hpp"
#include "uavsim/estimator.hpp"
#include "uavsim/geo.hpp"
#include "uavsim/gps_channel.hpp"
#include "uavsim/policy.hpp"
#include "uavsim/world.hpp"

namespace uavsim::harness {

using geo::LocalPos;
using policy::PolicyObservation;
using world::Action;
using world::DepthScan;
using world::UavState;

enum class VerdictKind { ReachedTarget, Collided, Timeout, SpoofDetected };

struct Verdict {
  VerdictKind kind = VerdictKind::Timeout;
  double t = 0.0;
};

inline const char* to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::ReachedTarget: return "reached-target";
    case VerdictKind::Collided: return "collided";
    case VerdictKind::Timeout: return "timeout";
    case VerdictKind::SpoofDetected: return "spoof-detected";
  }
  return "?";
}

inline std::string health_string(const estimator::HealthStatus& h) {
  if (std::holds_alternative<estimator::Healthy>(h)) return "healthy";
  if (const auto* r = std::get_if<estimator::Rejecting>(&h))
    return "rejecting(" + std::to_string(r->count) + ")";
  return "spoof-suspected";
}

struct TrajectoryRecord {
  double t = 0.0;
  LocalPos true_pos{};
  double true_yaw = 0.0;
  LocalPos est_pos{};
  geo::GeoCoord gps_coord{};  // as delivered to the estimator (post-spoof)
  double test_ratio = 0.0;
  bool accepted = true;
  std::string health;
  double d_rel = 0.0;    // as seen by the policy
  double yaw_rel = 0.0;
  Action action{};
  double min_obstacle_dist = 0.0;
};

struct RunResult {
  Verdict verdict{};
  std::vector<TrajectoryRecord> records;
  std::vector<gps::GpsMessage> gps_log;  // the delivered stream
  double max_test_ratio = 0.0;
  double final_est_offset_m = 0.0;  // |estimate - truth| at the end
};

/// A policy as the loop sees it. The scan is the same data as obs.depth but
/// with geometry attached, which the scripted controller needs.
using StepPolicy = std::function<Action(const PolicyObservation&, const DepthScan&)>;

inline StepPolicy make_policy(const ScenarioConfig& cfg) {
  if (cfg.policy_source == "surrogate") {
    policy::SurrogateConfig sc = cfg.surrogate;
    sc.v_max = cfg.v_max;
    sc.omega_max = cfg.omega_max;
    return [sc](const PolicyObservation& obs, const DepthScan& scan) {
      return policy::surrogate(obs, scan, sc);
    };
  }
  auto net = std::make_shared<policy::MlpPolicy>(policy::load_policy(cfg.policy_source));
  return [net](const PolicyObservation& obs, const DepthScan&) {
    return net->forward(obs);
  };
}

namespace detail {

inline const world::Circle& nearest_obstacle(const world::Environment& env,
                                             const LocalPos& from) {
  const world::Circle* best = &env.obstacles.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& c : env.obstacles) {
    const double d = (c.center - from).norm();
    if (d < best_d) {
      best_d = d;
      best = &c;
    }
  }
  return *best;
}

}  // namespace detail

inline RunResult run_scenario(const ScenarioConfig& cfg, const StepPolicy& pi) {
  const auto& env = cfg.env;
  const double d_scale = cfg.d_scale.value_or((env.target - env.start).norm());
  const policy::TargetSpec tgt{env.target, d_scale};

  RunResult out;
  UavState truth;
  truth.pos = env.start;
  truth.yaw = attack::bearing(env.start, env.target);

  estimator::EkfEstimate est;
  est.pos = env.start;
  est.cov = estimator::steady_state_gain(cfg.fusion, 1.0 / cfg.fusion.gps_rate_hz).cov;
  estimator::HealthStatus health = estimator::Healthy{};

  attack::AttackState att;
  double spoof_cap = std::numeric_limits<double>::infinity();
  if (cfg.attack.kind == AttackKind::Constrained && cfg.attack.cap_at_obstacle) {
    spoof_cap = (env.target - detail::nearest_obstacle(env, env.start).center).norm();
  }

  const int n_steps = static_cast<int>(std::llround(cfg.duration_s / cfg.dt_policy));
  const int gps_per = cfg.gps_samples_per_step();
  const double gps_dt = 1.0 / cfg.fusion.gps_rate_hz;
  Eigen::Vector2d last_cmd_vel = Eigen::Vector2d::Zero();
  std::uint64_t seq = 0;
  gps::GpsNoiseModel noise = cfg.noise;
  noise.seed ^= cfg.seed;

  out.verdict = {VerdictKind::Timeout, cfg.duration_s};

  for (int k = 0; k < n_steps; ++k) {
    const double t = k * cfg.dt_policy;
    const DepthScan scan = world::ray_depth(truth, env, cfg.n_rays, cfg.fov, cfg.max_range);

    // the navigation input: estimate position, or the attacker's direct feed
    LocalPos pos_for_policy = est.pos;
    if (cfg.attack.kind == AttackKind::Unconstrained && !env.obstacles.empty()) {
      const auto& obstacle = detail::nearest_obstacle(env, truth.pos);
      attack::PolicyFn pf = [&](const PolicyObservation& o) { return pi(o, scan); };
      const auto search =
          attack::unconstrained_search(pf, scan, truth, tgt, cfg.attack.grid, obstacle.center,
                                       cfg.attack.theta_tol, cfg.dt_policy, cfg.v_max);
      pos_for_policy = search.found ? search.position : search.best_effort;
    }

    policy::Relative rel{0.0, 0.0};
    try {
      rel = policy::compute_rel(pos_for_policy, truth.yaw, tgt);
    } catch (const policy::DegenerateRelative&) {
    }
    const auto obs = policy::make_observation(scan, rel, d_scale);
    const Action action = pi(obs, scan);

    TrajectoryRecord rec;
    rec.t = t;
    rec.true_pos = truth.pos;
    rec.true_yaw = truth.yaw;
    rec.d_rel = rel.d_rel;
    rec.yaw_rel = rel.yaw_rel;
    rec.action = action;
    rec.min_obstacle_dist = world::check_collision(truth, env).min_dist;

    truth = world::step_kinematics(truth, action, cfg.dt_policy);
    last_cmd_vel = {truth.speed * std::cos(truth.yaw), truth.speed * std::sin(truth.yaw)};

    // the attacker observes the truth at measurement time and taps the channel
    std::vector<LocalPos> signals;
    if (cfg.attack.kind == AttackKind::Constrained) {
      const auto& obstacle = detail::nearest_obstacle(env, truth.pos);
      att.observed_truth = truth.pos;
      attack::SpoofDirective directive;
      if (att.cumulative.norm() + cfg.attack.step_m <= spoof_cap) {
        directive = attack::constrained_step(obstacle.center, env.target, cfg.attack.step_m,
                                             cfg.attack.heading, truth.pos);
      }
      directive.repeats_T = gps_per;
      signals = attack::spoof_signal(att, directive);
    }

    for (int i = 0; i < gps_per; ++i) {
      const double t_gps = t + (i + 1) * gps_dt;
      gps::GpsMessage msg = gps::sample_gps(truth, cfg.frame, noise, t_gps, seq++);
      if (cfg.attack.kind == AttackKind::Constrained)
        msg = gps::overwrite_position(msg, signals[static_cast<std::size_t>(i)], cfg.frame);
      out.gps_log.push_back(msg);
      const LocalPos z = geo::geodetic_to_local(msg.coord, cfg.frame);
      const auto pred = estimator::predict_with_control(est, last_cmd_vel, gps_dt, cfg.fusion);
      const auto outcome = estimator::fuse_gps(pred, z, cfg.fusion);
      health = estimator::monitor(health, outcome, cfg.fusion);
      est = outcome.est;
      rec.gps_coord = msg.coord;
      rec.test_ratio = outcome.test_ratio;
      rec.accepted = outcome.accepted;
      out.max_test_ratio = std::max(out.max_test_ratio, outcome.test_ratio);
    }
    rec.est_pos = est.pos;
    rec.health = health_string(health);
    out.records.push_back(rec);

    const double t_next = (k + 1) * cfg.dt_policy;
    if (estimator::is_spoof_suspected(health)) {
      out.verdict = {VerdictKind::SpoofDetected, t_next};
      break;
    }
    if (world::check_collision(truth, env).collided) {
      out.verdict = {VerdictKind::Collided, t_next};
      break;
    }
    if ((truth.pos - env.target).norm() <= env.goal_radius) {
      out.verdict = {VerdictKind::ReachedTarget, t_next};
      break;
    }
    if (!env.bounds.contains(truth.pos)) {
      out.verdict = {VerdictKind::Timeout, t_next};
      break;
    }
  }

  if (out.records.empty()) {
    TrajectoryRecord rec;
    rec.true_pos = truth.pos;
    rec.true_yaw = truth.yaw;
    rec.est_pos = est.pos;
    rec.health = health_string(health);
    rec.min_obstacle_dist = world::check_collision(truth, env).min_dist;
    out.records.push_back(rec);
  }
  out.final_est_offset_m = (est.pos - truth.pos).norm();
  return out;
}

inline RunResult run_scenario(const ScenarioConfig& cfg) {
  return run_scenario(cfg, make_policy(cfg));
}

// ---------------------------------------------------------------------------
// Export. Formatting is fixed-width printf so a re-export of the same run is
// byte-identical.
// ---------------------------------------------------------------------------

inline constexpr const char* kTrajectoryHeader =
    "t,true_x,true_y,true_yaw,est_x,est_y,gps_lat,gps_lon,test_ratio,accepted,"
    "health,d_rel,yaw_rel,speed_cmd,yaw_rate_cmd,min_obstacle_dist";

inline std::string format_record(const TrajectoryRecord& r) {
  char buf[360];
  std::snprintf(buf, sizeof(buf),
                "%.3f,%.6f,%.6f,%.6f,%.6f,%.6f,%.9f,%.9f,%.6f,%d,%s,%.6f,%.6f,%.6f,%.6f,%.6f",
                r.t, r.true_pos.x_east_m, r.true_pos.y_north_m, r.true_yaw,
                r.est_pos.x_east_m, r.est_pos.y_north_m, r.gps_coord.lat_deg,
                r.gps_coord.lon_deg, r.test_ratio, r.accepted ? 1 : 0, r.health.c_str(),
                r.d_rel, r.yaw_rel, r.action.speed_cmd, r.action.yaw_rate_cmd,
                r.min_obstacle_dist);
  return buf;
}

inline void export_records(const std::vector<TrajectoryRecord>& records,
                           const std::filesystem::path& out_dir, const std::string& name) {
  std::filesystem::create_directories(out_dir);
  auto open = [&](const std::string& suffix) {
    std::ofstream out(out_dir / (name + suffix));
    if (!out) throw ConfigError("cannot write to " + (out_dir / (name + suffix)).string());
    return out;
  };
  auto fmt2 = [](double a, double b) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f", a, b);
    return std::string(buf);
  };
  {
    auto out = open("_trajectory.csv");
    out << kTrajectoryHeader << "\n";
    for (const auto& r : records) out << format_record(r) << "\n";
  }
  {
    auto out = open("_true_path.csv");
    out << "x,y\n";
    for (const auto& r : records)
      out << fmt2(r.true_pos.x_east_m, r.true_pos.y_north_m) << "\n";
  }
  {
    auto out = open("_est_path.csv");
    out << "x,y\n";
    for (const auto& r : records)
      out << fmt2(r.est_pos.x_east_m, r.est_pos.y_north_m) << "\n";
  }
  {
    auto out = open("_test_ratio.csv");
    out << "t,test_ratio\n";
    for (const auto& r : records) out << fmt2(r.t, r.test_ratio) << "\n";
  }
}

inline void export_run(const RunResult& run, const std::filesystem::path& out_dir,
                       const std::string& name) {
  export_records(run.records, out_dir, name);
  gps::write_log(run.gps_log, (out_dir / (name + "_gps.csv")).string());
  {
    std::ofstream out(out_dir / (name + "_verdict.txt"));
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s %.3f\n", to_string(run.verdict.kind), run.verdict.t);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Canned experiment reproductions.
// ---------------------------------------------------------------------------

/// Straight-approach geometry: start at the origin, a radius-5 obstacle 100 m
/// north on the path, target 150 m north (optionally offset east).
inline ScenarioConfig make_corridor_config(double target_x_east) {
  ScenarioConfig cfg;
  cfg.env.start = {0.0, 0.0};
  cfg.env.target = {target_x_east, 150.0};
  cfg.env.obstacles.push_back({{0.0, 100.0}, 5.0});
  cfg.env.bounds = {-500.0, -500.0, 500.0, 500.0};
  cfg.noise = {0.3, 1};
  cfg.duration_s = 200.0;
  return cfg;
}

struct ReplicateSummary {
  std::string id;
  std::vector<std::pair<std::string, std::string>> fields;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline void add_run_fields(ReplicateSummary& s, const std::string& prefix,
                           const RunResult& run) {
  double min_obstacle = std::numeric_limits<double>::infinity();
  for (const auto& r : run.records) min_obstacle = std::min(min_obstacle, r.min_obstacle_dist);
  s.fields.emplace_back(prefix + "_verdict", to_string(run.verdict.kind));
  s.fields.emplace_back(prefix + "_t", fmt(run.verdict.t));
  s.fields.emplace_back(prefix + "_min_obstacle_dist_m", fmt(min_obstacle));
  s.fields.emplace_back(prefix + "_max_test_ratio", fmt(run.max_test_ratio));
  s.fields.emplace_back(prefix + "_final_est_offset_m", fmt(run.final_est_offset_m));
}

}  // namespace detail

/// Runs one of the canned reproductions and writes its artifacts under
/// out_dir. Known ids: fig5, fig7-envelope, fig8a, fig8b.
inline ReplicateSummary replicate(const std::string& id,
                                  const std::filesystem::path& out_dir,
                                  const std::string& policy_source = "surrogate") {
  ReplicateSummary summary;
  summary.id = id;
  std::filesystem::create_directories(out_dir);

  auto run_pair = [&](ScenarioConfig cfg) {
    cfg.policy_source = policy_source;
    const RunResult attacked = run_scenario(cfg);
    ScenarioConfig clean = cfg;
    clean.attack.kind = AttackKind::None;
    const RunResult baseline = run_scenario(clean);
    export_run(attacked, out_dir, id + "_attack");
    export_run(baseline, out_dir, id + "_baseline");
    detail::add_run_fields(summary, "attack", attacked);
    detail::add_run_fields(summary, "baseline", baseline);
  };

  if (id == "fig8a" || id == "fig8b") {
    ScenarioConfig cfg = make_corridor_config(id == "fig8a" ? 0.0 : 30.0);
    cfg.attack.kind = AttackKind::Constrained;
    cfg.attack.heading = attack::SpoofHeading::TargetMinusObstacle;
    cfg.attack.step_m = attack::kDefaultMaxStep;
    run_pair(cfg);
  } else if (id == "fig5") {
    ScenarioConfig cfg = make_corridor_config(0.0);
    cfg.attack.kind = AttackKind::Unconstrained;
    cfg.duration_s = 120.0;
    run_pair(cfg);
  } else if (id == "fig7-envelope") {
    const estimator::FusionConfig fusion{};
    const auto env_report = attack::max_undetected_rate(fusion);
    const auto [ratio_35, offset_35] = attack::detail::drift_run(fusion, 1.1, 35.0);
    summary.fields.emplace_back("max_undetected_rate_mps", detail::fmt(env_report.max_rate_mps));
    summary.fields.emplace_back("rate_run_max_test_ratio",
                                detail::fmt(env_report.run_max_test_ratio));
    summary.fields.emplace_back("rate_run_final_offset_m",
                                detail::fmt(env_report.run_final_offset_m));
    summary.fields.emplace_back("rate_run_duration_s", detail::fmt(env_report.run_duration_s));
    summary.fields.emplace_back("drift_1p1_35s_max_test_ratio", detail::fmt(ratio_35));
    summary.fields.emplace_back("drift_1p1_35s_offset_m", detail::fmt(offset_35));
  } else {
    throw ConfigError("unknown experiment id: " + id);
  }

  std::ofstream out(out_dir / (id + "_summary.txt"));
  for (const auto& [k, v] : summary.fields) out << k << "=" << v << "\n";
  return summary;
}

}  // namespace uavsim::harness
