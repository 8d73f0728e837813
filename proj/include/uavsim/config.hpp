#pragma once

// Scenario configuration: a flat dotted-key text format with a versioned
// schema. Unknown keys are hard errors so a mistyped attack setting cannot
// silently fall back to a benign default.

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavsim/attack.hpp"
#include "uavsim/estimator.hpp"
#include "uavsim/geo.hpp"
#include "uavsim/gps_channel.hpp"
#include "uavsim/policy.hpp"
#include "uavsim/world.hpp"

namespace uavsim::harness {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class AttackKind { None, Unconstrained, Constrained };

struct AttackConfig {
  AttackKind kind = AttackKind::None;
  // constrained
  double step_m = attack::kDefaultMaxStep;
  attack::SpoofHeading heading = attack::SpoofHeading::TargetMinusObstacle;
  bool cap_at_obstacle = true;  // stop deepening once the steered point reaches the obstacle
  // unconstrained
  attack::SearchGrid grid{};
  double theta_tol = attack::kDefaultThetaTol;
};

struct ScenarioConfig {
  int schema_version = 1;
  world::Environment env{};
  int n_rays = world::kDefaultNumRays;
  double fov = world::kDefaultFov;
  double max_range = world::kDefaultMaxRange;
  double v_max = world::kDefaultVMax;
  double omega_max = world::kDefaultOmegaMax;

  std::string policy_source = "surrogate";  // "surrogate" or a weights-file path
  policy::SurrogateConfig surrogate{};
  std::optional<double> d_scale;  // default: initial distance to target

  AttackConfig attack{};
  estimator::FusionConfig fusion{};
  gps::GpsNoiseModel noise{0.3, 1};
  geo::FlatEarthFrame frame{};

  double dt_policy = world::kDefaultDt;
  double duration_s = 200.0;
  std::uint64_t seed = 1;

  [[nodiscard]] int gps_samples_per_step() const {
    const double n = dt_policy * fusion.gps_rate_hz;
    const double rounded = std::round(n);
    if (std::abs(n - rounded) > 1e-9 || rounded < 1.0)
      throw ConfigError("dt_policy * gps_rate_hz must be a positive integer");
    return static_cast<int>(rounded);
  }
};

namespace detail {

inline std::vector<double> parse_numbers(const std::string& v, std::size_t expect,
                                         const std::string& key) {
  std::istringstream ss(v);
  std::vector<double> out;
  double x;
  while (ss >> x) out.push_back(x);
  if (out.size() != expect)
    throw ConfigError("key '" + key + "' expects " + std::to_string(expect) +
                      " numbers, got '" + v + "'");
  return out;
}

inline double parse_double(const std::string& v, const std::string& key) {
  return parse_numbers(v, 1, key)[0];
}

}  // namespace detail

inline ScenarioConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::vector<std::string>> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    kv[key].push_back(val);
  }

  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    if (it->second.size() != 1 && key != "world.obstacle")
      throw ConfigError("key '" + key + "' given more than once");
    std::string v = it->second.front();
    kv.erase(it);
    return v;
  };

  ScenarioConfig cfg;
  if (auto v = take("schema_version")) {
    cfg.schema_version = static_cast<int>(detail::parse_double(*v, "schema_version"));
  } else {
    throw ConfigError("missing required key 'schema_version'");
  }
  if (cfg.schema_version != 1)
    throw ConfigError("unsupported schema_version " + std::to_string(cfg.schema_version));

  if (auto v = take("world.start")) {
    auto n = detail::parse_numbers(*v, 2, "world.start");
    cfg.env.start = {n[0], n[1]};
  }
  if (auto v = take("world.target")) {
    auto n = detail::parse_numbers(*v, 2, "world.target");
    cfg.env.target = {n[0], n[1]};
  }
  if (auto it = kv.find("world.obstacle"); it != kv.end()) {
    for (const auto& v : it->second) {
      auto n = detail::parse_numbers(v, 3, "world.obstacle");
      if (n[2] <= 0.0) throw ConfigError("obstacle radius must be positive");
      cfg.env.obstacles.push_back({{n[0], n[1]}, n[2]});
    }
    kv.erase(it);
  }
  if (auto v = take("world.bounds")) {
    auto n = detail::parse_numbers(*v, 4, "world.bounds");
    cfg.env.bounds = {n[0], n[1], n[2], n[3]};
  }
  if (auto v = take("world.collision_radius"))
    cfg.env.collision_radius = detail::parse_double(*v, "world.collision_radius");
  if (auto v = take("world.goal_radius"))
    cfg.env.goal_radius = detail::parse_double(*v, "world.goal_radius");
  if (auto v = take("world.n_rays"))
    cfg.n_rays = static_cast<int>(detail::parse_double(*v, "world.n_rays"));
  if (auto v = take("world.fov")) cfg.fov = detail::parse_double(*v, "world.fov");
  if (auto v = take("world.max_range"))
    cfg.max_range = detail::parse_double(*v, "world.max_range");
  if (auto v = take("world.v_max")) cfg.v_max = detail::parse_double(*v, "world.v_max");
  if (auto v = take("world.omega_max"))
    cfg.omega_max = detail::parse_double(*v, "world.omega_max");

  if (auto v = take("policy.source")) cfg.policy_source = *v;
  if (auto v = take("policy.d_scale")) {
    if (*v != "auto") cfg.d_scale = detail::parse_double(*v, "policy.d_scale");
  }
  if (auto v = take("policy.k_goal"))
    cfg.surrogate.k_goal = detail::parse_double(*v, "policy.k_goal");
  if (auto v = take("policy.k_obs"))
    cfg.surrogate.k_obs = detail::parse_double(*v, "policy.k_obs");
  if (auto v = take("policy.d_safe_norm"))
    cfg.surrogate.d_safe_norm = detail::parse_double(*v, "policy.d_safe_norm");

  if (auto v = take("attack.kind")) {
    if (*v == "none") cfg.attack.kind = AttackKind::None;
    else if (*v == "unconstrained") cfg.attack.kind = AttackKind::Unconstrained;
    else if (*v == "constrained") cfg.attack.kind = AttackKind::Constrained;
    else throw ConfigError("attack.kind must be none|unconstrained|constrained");
  }
  if (auto v = take("attack.step_m"))
    cfg.attack.step_m = detail::parse_double(*v, "attack.step_m");
  if (auto v = take("attack.heading")) {
    if (*v == "obstacle-minus-target")
      cfg.attack.heading = attack::SpoofHeading::ObstacleMinusTarget;
    else if (*v == "target-minus-obstacle")
      cfg.attack.heading = attack::SpoofHeading::TargetMinusObstacle;
    else if (*v == "obstacle-minus-uav")
      cfg.attack.heading = attack::SpoofHeading::ObstacleMinusUav;
    else
      throw ConfigError(
          "attack.heading must be obstacle-minus-target|target-minus-obstacle|obstacle-minus-uav");
  }
  if (auto v = take("attack.cap_at_obstacle"))
    cfg.attack.cap_at_obstacle = (*v == "true" || *v == "1");
  if (auto v = take("attack.grid_radius"))
    cfg.attack.grid.radius_P = detail::parse_double(*v, "attack.grid_radius");
  if (auto v = take("attack.grid_resolution"))
    cfg.attack.grid.resolution = detail::parse_double(*v, "attack.grid_resolution");
  if (auto v = take("attack.theta_tol"))
    cfg.attack.theta_tol = detail::parse_double(*v, "attack.theta_tol");

  if (auto v = take("fusion.q_accel"))
    cfg.fusion.q_accel = detail::parse_double(*v, "fusion.q_accel");
  if (auto v = take("fusion.r_gps"))
    cfg.fusion.r_gps = detail::parse_double(*v, "fusion.r_gps");
  if (auto v = take("fusion.gate")) cfg.fusion.gate = detail::parse_double(*v, "fusion.gate");
  if (auto v = take("fusion.reject_window"))
    cfg.fusion.reject_window = static_cast<int>(detail::parse_double(*v, "fusion.reject_window"));
  if (auto v = take("fusion.gps_rate_hz"))
    cfg.fusion.gps_rate_hz = detail::parse_double(*v, "fusion.gps_rate_hz");

  if (auto v = take("noise.sigma")) cfg.noise.sigma = detail::parse_double(*v, "noise.sigma");
  if (auto v = take("noise.seed"))
    cfg.noise.seed = static_cast<std::uint64_t>(detail::parse_double(*v, "noise.seed"));

  if (auto v = take("frame.origin_lat"))
    cfg.frame.origin.lat_deg = detail::parse_double(*v, "frame.origin_lat");
  if (auto v = take("frame.origin_lon"))
    cfg.frame.origin.lon_deg = detail::parse_double(*v, "frame.origin_lon");
  if (auto v = take("frame.meters_per_degree"))
    cfg.frame.meters_per_degree = detail::parse_double(*v, "frame.meters_per_degree");

  if (auto v = take("run.dt_policy"))
    cfg.dt_policy = detail::parse_double(*v, "run.dt_policy");
  if (auto v = take("run.duration_s"))
    cfg.duration_s = detail::parse_double(*v, "run.duration_s");
  if (auto v = take("run.seed"))
    cfg.seed = static_cast<std::uint64_t>(detail::parse_double(*v, "run.seed"));

  if (!kv.empty()) throw ConfigError("unknown key '" + kv.begin()->first + "'");

  if (cfg.attack.kind == AttackKind::Constrained && cfg.env.obstacles.empty())
    throw ConfigError("constrained attack requires at least one obstacle");
  (void)cfg.gps_samples_per_step();
  return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace uavsim::harness
