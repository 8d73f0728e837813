#pragma once

// The navigation system's input computation, the dense actor network, and a
// deterministic scripted surrogate controller. The surrogate stands in for a
// trained policy so attack results are reproducible without training.

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavsim/geo.hpp"
#include "uavsim/mlp.hpp"
#include "uavsim/world.hpp"

namespace uavsim::policy {

using geo::LocalPos;
using geo::wrap_angle;
using world::Action;
using world::DepthScan;

struct DegenerateRelative : std::runtime_error {
  DegenerateRelative() : std::runtime_error("current position equals the target") {}
};
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

struct TargetSpec {
  LocalPos pos_tar{};
  double d_scale = 1.0;  // m; normalizes relative distance
};

struct PolicyObservation {
  std::vector<double> depth;  // normalized ranges in [0, 1]
  double d_rel_norm = 0.0;    // clipped to [0, 1]
  double yaw_rel_norm = 0.0;  // in [-1, 1]
};

struct Relative {
  double d_rel = 0.0;    // m
  double yaw_rel = 0.0;  // rad, in (-pi, pi]
};

inline Relative compute_rel(const LocalPos& pos_cur, double yaw_cur,
                            const TargetSpec& tgt) {
  const LocalPos d = tgt.pos_tar - pos_cur;
  if (d.x_east_m == 0.0 && d.y_north_m == 0.0) throw DegenerateRelative{};
  return {d.norm(), wrap_angle(std::atan2(d.y_north_m, d.x_east_m) - yaw_cur)};
}

inline PolicyObservation make_observation(const DepthScan& scan, const Relative& rel,
                                          double d_scale) {
  PolicyObservation obs;
  obs.depth = scan.ranges;
  obs.d_rel_norm = std::clamp(rel.d_rel / d_scale, 0.0, 1.0);
  obs.yaw_rel_norm = rel.yaw_rel / std::numbers::pi;
  return obs;
}

inline Eigen::VectorXd depth_vector(const PolicyObservation& obs) {
  return Eigen::Map<const Eigen::VectorXd>(obs.depth.data(),
                                           static_cast<Eigen::Index>(obs.depth.size()));
}

// Dense actor: a depth feature branch whose output is concatenated with the
// two physical-state scalars before the trunk. The trunk ends in tanh so both
// normalized outputs live in [-1, 1].
struct MlpPolicy {
  mlp::Mlp depth_branch;  // n_rays -> ... -> feature dim
  mlp::Mlp trunk;         // feature dim + 2 -> ... -> 2
  double v_max = world::kDefaultVMax;
  double omega_max = world::kDefaultOmegaMax;

  static MlpPolicy random(int n_rays, const std::vector<int>& branch_hidden,
                          const std::vector<int>& trunk_hidden, std::uint64_t seed,
                          double v_max = world::kDefaultVMax,
                          double omega_max = world::kDefaultOmegaMax) {
    MlpPolicy p;
    std::vector<int> bd{n_rays};
    bd.insert(bd.end(), branch_hidden.begin(), branch_hidden.end());
    std::vector<mlp::Activation> ba(bd.size() - 1, mlp::Activation::Relu);
    p.depth_branch = mlp::Mlp::random(bd, ba, seed);

    std::vector<int> td{bd.back() + 2};
    td.insert(td.end(), trunk_hidden.begin(), trunk_hidden.end());
    td.push_back(2);
    std::vector<mlp::Activation> ta(td.size() - 1, mlp::Activation::Relu);
    ta.back() = mlp::Activation::Tanh;
    p.trunk = mlp::Mlp::random(td, ta, seed + 1);
    p.v_max = v_max;
    p.omega_max = omega_max;
    return p;
  }

  /// Normalized forward pass: both outputs in [-1, 1]. Batches are columns.
  [[nodiscard]] Eigen::MatrixXd forward_normalized(const Eigen::MatrixXd& depth,
                                                   const Eigen::MatrixXd& scalars) const {
    if (scalars.rows() != 2 || depth.cols() != scalars.cols())
      throw mlp::DimensionMismatch("observation batch shapes disagree");
    const Eigen::MatrixXd feat = depth_branch.forward(depth);
    Eigen::MatrixXd cat(feat.rows() + 2, feat.cols());
    cat << feat, scalars;
    return trunk.forward(cat);
  }

  [[nodiscard]] Eigen::Vector2d forward_normalized(const PolicyObservation& obs) const {
    Eigen::MatrixXd scalars(2, 1);
    scalars << obs.d_rel_norm, obs.yaw_rel_norm;
    return forward_normalized(depth_vector(obs), scalars).col(0);
  }

  /// Maps normalized outputs to an action: speed affinely from [-1,1] to
  /// [0, v_max], yaw rate linearly to [-omega_max, omega_max].
  [[nodiscard]] Action to_action(const Eigen::Vector2d& u) const {
    return world::clamp_action(0.5 * (u(0) + 1.0) * v_max, u(1) * omega_max,
                               v_max, omega_max);
  }

  [[nodiscard]] Action forward(const PolicyObservation& obs) const {
    return to_action(forward_normalized(obs));
  }
};

struct SurrogateConfig {
  double k_goal = 1.0;
  double k_obs = 2.0;
  double d_safe_norm = 0.4;
  double v_max = world::kDefaultVMax;
  double omega_max = world::kDefaultOmegaMax;
};

/// Deterministic goal-attraction / obstacle-repulsion controller. The
/// repulsion steers away from the minimum-depth ray, weighted by how head-on
/// that ray is, so lateral obstacles are weakly repelling.
inline Action surrogate(const PolicyObservation& obs, const DepthScan& scan,
                        const SurrogateConfig& cfg = {}) {
  const double md = scan.min_depth();
  double repulsion = 0.0;
  if (md < cfg.d_safe_norm) {
    const double bear = scan.ray_bearing(scan.min_index());
    const double side = bear >= 0.0 ? -1.0 : 1.0;
    repulsion = side * (1.0 - md / cfg.d_safe_norm) * std::cos(bear);
  }
  const double yaw_rate =
      cfg.k_goal * obs.yaw_rel_norm * std::numbers::pi + cfg.k_obs * repulsion;
  const double speed = cfg.v_max * std::min(1.0, md / cfg.d_safe_norm) *
                       std::max(0.2, 1.0 - std::abs(obs.yaw_rel_norm));
  return world::clamp_action(speed, yaw_rate, cfg.v_max, cfg.omega_max);
}

// ---------------------------------------------------------------------------
// Policy file format: little-endian binary. Header: magic "UAVPOLCY",
// u32 version, doubles v_max/omega_max, then each net as
// u32 n_layers { u32 rows, u32 cols, u8 activation, row-major doubles w, b }.
// A human-readable ".meta" sidecar records the shapes.
// ---------------------------------------------------------------------------

inline constexpr char kPolicyMagic[8] = {'U', 'A', 'V', 'P', 'O', 'L', 'C', 'Y'};
inline constexpr std::uint32_t kPolicyVersion = 1;

namespace detail {

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("unexpected end of policy file");
  return v;
}

inline void write_net(std::ostream& out, const mlp::Mlp& net) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.w.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.w.cols()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(l.act));
    for (Eigen::Index r = 0; r < l.w.rows(); ++r)
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) put<double>(out, l.w(r, c));
    for (Eigen::Index r = 0; r < l.b.size(); ++r) put<double>(out, l.b(r));
  }
}

inline mlp::Mlp read_net(std::istream& in) {
  const auto n_layers = get<std::uint32_t>(in);
  if (n_layers == 0 || n_layers > 64) throw FormatError("implausible layer count");
  std::vector<int> dims;
  std::vector<mlp::Activation> acts;
  std::vector<mlp::Layer> layers;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    const auto act = get<std::uint8_t>(in);
    if (act > 2) throw FormatError("unknown activation tag");
    if (rows == 0 || cols == 0 || rows > 100000 || cols > 100000)
      throw FormatError("implausible layer shape");
    mlp::Layer l;
    l.w.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) l.w(r, c) = get<double>(in);
    l.b.resize(rows);
    for (std::uint32_t r = 0; r < rows; ++r) l.b(r) = get<double>(in);
    l.act = static_cast<mlp::Activation>(act);
    layers.push_back(std::move(l));
    if (i > 0 && layers[i].w.cols() != layers[i - 1].w.rows())
      throw FormatError("inconsistent consecutive layer shapes");
  }
  mlp::Mlp net = mlp::Mlp::zeros({static_cast<int>(layers.front().w.cols()),
                                  static_cast<int>(layers.front().w.rows())},
                                 {layers.front().act});
  net.layers() = std::move(layers);
  return net;
}

}  // namespace detail

inline void save_policy(const MlpPolicy& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open policy file for writing: " + path);
  out.write(kPolicyMagic, sizeof(kPolicyMagic));
  detail::put<std::uint32_t>(out, kPolicyVersion);
  detail::put<double>(out, p.v_max);
  detail::put<double>(out, p.omega_max);
  detail::write_net(out, p.depth_branch);
  detail::write_net(out, p.trunk);
  if (!out) throw FormatError("write failed: " + path);

  std::ofstream meta(path + ".meta");
  meta << "format=uavsim-policy\nversion=" << kPolicyVersion << "\nv_max=" << p.v_max
       << "\nomega_max=" << p.omega_max << "\ndepth_branch=";
  for (const auto& l : p.depth_branch.layers()) meta << l.w.cols() << "->" << l.w.rows() << " ";
  meta << "\ntrunk=";
  for (const auto& l : p.trunk.layers()) meta << l.w.cols() << "->" << l.w.rows() << " ";
  meta << "\n";
}

inline MlpPolicy load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open policy file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kPolicyMagic, sizeof(magic)) != 0)
    throw FormatError("not a policy file: bad magic");
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kPolicyVersion)
    throw FormatError("policy version " + std::to_string(version) +
                      " unsupported; expected " + std::to_string(kPolicyVersion));
  MlpPolicy p;
  p.v_max = detail::get<double>(in);
  p.omega_max = detail::get<double>(in);
  p.depth_branch = detail::read_net(in);
  p.trunk = detail::read_net(in);
  if (p.trunk.input_dim() != p.depth_branch.output_dim() + 2)
    throw FormatError("trunk input does not match branch output + 2 scalars");
  if (p.trunk.output_dim() != 2) throw FormatError("trunk must have 2 outputs");
  return p;
}

}  // namespace uavsim::policy
