#pragma once

// Desk-scale TD3 trainer for the planar navigation task. Actor and critics are
// small dense networks (see mlp.hpp); training is single-threaded and fully
// deterministic under the config seed.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "uavsim/mlp.hpp"
#include "uavsim/policy.hpp"
#include "uavsim/world.hpp"

namespace uavsim::td3 {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;
using policy::MlpPolicy;
using policy::PolicyObservation;

struct Transition {
  VectorXd depth;
  Vector2d scalars;       // (d_rel_norm, yaw_rel_norm)
  Vector2d action;        // normalized to [-1, 1]^2
  double reward = 0.0;
  VectorXd next_depth;
  Vector2d next_scalars;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity, std::uint64_t seed)
      : capacity_(capacity), rng_(seed) {}

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);  // FIFO eviction
      head_ = (head_ + 1) % capacity_;
    }
  }

  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] const Transition& at(std::size_t i) const { return data_[i]; }

  [[nodiscard]] std::vector<std::size_t> sample_indices(std::size_t batch) {
    std::uniform_int_distribution<std::size_t> dist(0, data_.size() - 1);
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = dist(rng_);
    return idx;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
  std::mt19937_64 rng_;
};

struct Td3Config {
  double gamma = 0.99;
  double polyak = 0.995;
  int policy_delay = 2;
  double target_noise_sigma = 0.2;
  double noise_clip = 0.5;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double exploration_sigma = 0.1;
  long total_steps = 150000;
  std::uint64_t seed = 0;
  // schedule
  long start_steps = 1000;       // uniform random warmup actions
  long update_after = 1000;      // first gradient step
  int max_episode_steps = 400;
  double curriculum_frac = 0.4;  // fraction of steps trained without obstacles
  double obstacle_jitter = 6.0;  // m, lateral jitter of the curriculum obstacle
  // network shape
  std::vector<int> branch_hidden{32, 16};
  std::vector<int> trunk_hidden{64, 64};
};

struct RewardConfig {
  double k_prog = 1.0;
  double collision_penalty = 10.0;
  double goal_bonus = 10.0;
  double step_penalty = 0.01;
};

/// Progress-shaped reward with terminal collision/goal terms.
inline double reward(const world::UavState& prev, const world::UavState& next,
                     const world::Environment& env, const RewardConfig& rc = {}) {
  const double d_prev = (env.target - prev.pos).norm();
  const double d_next = (env.target - next.pos).norm();
  double r = rc.k_prog * (d_prev - d_next) - rc.step_penalty;
  if (world::check_collision(next, env).collided) r -= rc.collision_penalty;
  if (d_next <= env.goal_radius) r += rc.goal_bonus;
  return r;
}

/// Discounted return of a recorded reward sequence from step t on.
inline double discounted_return(const std::vector<double>& rewards, double gamma,
                                std::size_t t = 0) {
  double g = 0.0;
  double scale = 1.0;
  for (std::size_t k = t; k < rewards.size(); ++k) {
    g += scale * rewards[k];
    scale *= gamma;
  }
  return g;
}

// Q-network: a depth branch plus a trunk over [features, scalars, action].
struct Critic {
  mlp::Mlp branch;
  mlp::Mlp trunk;

  static Critic random(int n_rays, const std::vector<int>& branch_hidden,
                       const std::vector<int>& trunk_hidden, std::uint64_t seed) {
    Critic c;
    std::vector<int> bd{n_rays};
    bd.insert(bd.end(), branch_hidden.begin(), branch_hidden.end());
    std::vector<mlp::Activation> ba(bd.size() - 1, mlp::Activation::Relu);
    c.branch = mlp::Mlp::random(bd, ba, seed);
    std::vector<int> td{bd.back() + 4};
    td.insert(td.end(), trunk_hidden.begin(), trunk_hidden.end());
    td.push_back(1);
    std::vector<mlp::Activation> ta(td.size() - 1, mlp::Activation::Relu);
    ta.back() = mlp::Activation::Identity;
    c.trunk = mlp::Mlp::random(td, ta, seed + 1);
    return c;
  }

  struct Cache {
    mlp::ForwardCache branch_cache;
    mlp::ForwardCache trunk_cache;
  };

  [[nodiscard]] Eigen::RowVectorXd forward(const MatrixXd& depth, const MatrixXd& scalars,
                                           const MatrixXd& action,
                                           Cache* cache = nullptr) const {
    const MatrixXd feat =
        branch.forward(depth, cache ? &cache->branch_cache : nullptr);
    MatrixXd cat(feat.rows() + 4, feat.cols());
    cat << feat, scalars, action;
    return trunk.forward(cat, cache ? &cache->trunk_cache : nullptr).row(0);
  }

  /// Backpropagates dL/dQ. Optionally reports dL/d(action) and parameter grads.
  void backward(const Cache& cache, const Eigen::RowVectorXd& dq,
                mlp::Grads* branch_grads, mlp::Grads* trunk_grads,
                MatrixXd* d_action = nullptr) const {
    const MatrixXd d_cat = trunk.backward(cache.trunk_cache, dq, trunk_grads);
    const Eigen::Index feat_dim = d_cat.rows() - 4;
    if (d_action) *d_action = d_cat.bottomRows(2);
    // propagate into the branch only when parameter grads are wanted
    if (branch_grads) branch.backward(cache.branch_cache, d_cat.topRows(feat_dim), branch_grads);
  }
};

struct CriticPair {
  Critic q1, q2;
  Critic q1_target, q2_target;
};

struct Batch {
  MatrixXd depth, scalars, action, next_depth, next_scalars;
  VectorXd r, done;
};

inline Batch gather(const ReplayBuffer& buf, const std::vector<std::size_t>& idx) {
  const auto b = static_cast<Eigen::Index>(idx.size());
  const auto nd = buf.at(idx[0]).depth.size();
  Batch out;
  out.depth.resize(nd, b);
  out.scalars.resize(2, b);
  out.action.resize(2, b);
  out.next_depth.resize(nd, b);
  out.next_scalars.resize(2, b);
  out.r.resize(b);
  out.done.resize(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Transition& t = buf.at(idx[static_cast<std::size_t>(i)]);
    out.depth.col(i) = t.depth;
    out.scalars.col(i) = t.scalars;
    out.action.col(i) = t.action;
    out.next_depth.col(i) = t.next_depth;
    out.next_scalars.col(i) = t.next_scalars;
    out.r(i) = t.reward;
    out.done(i) = t.done ? 1.0 : 0.0;
  }
  return out;
}

/// Target action with clipped Gaussian smoothing noise, clipped to [-1, 1].
inline MatrixXd smoothed_target_action(const MlpPolicy& actor_target,
                                       const MatrixXd& next_depth,
                                       const MatrixXd& next_scalars,
                                       const Td3Config& cfg, std::mt19937_64& rng) {
  MatrixXd a = actor_target.forward_normalized(next_depth, next_scalars);
  if (cfg.target_noise_sigma > 0.0) {
    std::normal_distribution<double> n(0.0, cfg.target_noise_sigma);
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double eps = std::clamp(n(rng), -cfg.noise_clip, cfg.noise_clip);
        a(r, c) += eps;
      }
  }
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

struct CriticLosses {
  double q1 = 0.0, q2 = 0.0;
  Eigen::RowVectorXd td_target;  // kept for instrumentation in tests
};

/// One gradient step on both critics against the clipped double-Q TD target.
inline CriticLosses critic_update(const Batch& batch, CriticPair& critics,
                                  const MlpPolicy& actor_target, const Td3Config& cfg,
                                  std::mt19937_64& rng, mlp::Adam& opt_q1_branch,
                                  mlp::Adam& opt_q1_trunk, mlp::Adam& opt_q2_branch,
                                  mlp::Adam& opt_q2_trunk) {
  const auto b = batch.r.size();
  const MatrixXd a_next =
      smoothed_target_action(actor_target, batch.next_depth, batch.next_scalars, cfg, rng);
  const Eigen::RowVectorXd t1 =
      critics.q1_target.forward(batch.next_depth, batch.next_scalars, a_next);
  const Eigen::RowVectorXd t2 =
      critics.q2_target.forward(batch.next_depth, batch.next_scalars, a_next);
  const Eigen::RowVectorXd q_min = t1.cwiseMin(t2);

  CriticLosses out;
  out.td_target = batch.r.transpose().array() +
                  cfg.gamma * (1.0 - batch.done.transpose().array()) * q_min.array();

  for (int which = 0; which < 2; ++which) {
    Critic& c = which == 0 ? critics.q1 : critics.q2;
    Critic::Cache cache;
    const Eigen::RowVectorXd q = c.forward(batch.depth, batch.scalars, batch.action, &cache);
    const Eigen::RowVectorXd err = q - out.td_target;
    const double loss = err.squaredNorm() / static_cast<double>(b);
    (which == 0 ? out.q1 : out.q2) = loss;
    const Eigen::RowVectorXd dq = 2.0 * err / static_cast<double>(b);
    mlp::Grads gb, gt;
    c.backward(cache, dq, &gb, &gt);
    (which == 0 ? opt_q1_branch : opt_q2_branch).step(c.branch, gb);
    (which == 0 ? opt_q1_trunk : opt_q2_trunk).step(c.trunk, gt);
  }
  return out;
}

/// One ascent step on mean Q1(s, pi(s)); the gradient flows through the
/// critic's action input into the actor.
inline double actor_update(const Batch& batch, MlpPolicy& actor, const Critic& q1,
                           mlp::Adam& opt_branch, mlp::Adam& opt_trunk) {
  const auto b = batch.r.size();

  mlp::ForwardCache bc, tc;
  const MatrixXd feat = actor.depth_branch.forward(batch.depth, &bc);
  MatrixXd cat(feat.rows() + 2, feat.cols());
  cat << feat, batch.scalars;
  const MatrixXd a = actor.trunk.forward(cat, &tc);

  Critic::Cache qc;
  const Eigen::RowVectorXd q = q1.forward(batch.depth, batch.scalars, a, &qc);
  const double objective = q.mean();

  // dL/dQ for loss = -mean(Q)
  const Eigen::RowVectorXd dq =
      Eigen::RowVectorXd::Constant(b, -1.0 / static_cast<double>(b));
  MatrixXd d_action;
  q1.backward(qc, dq, nullptr, nullptr, &d_action);

  mlp::Grads trunk_grads;
  const MatrixXd d_cat = actor.trunk.backward(tc, d_action, &trunk_grads);
  mlp::Grads branch_grads;
  actor.depth_branch.backward(bc, d_cat.topRows(feat.rows()), &branch_grads);

  opt_branch.step(actor.depth_branch, branch_grads);
  opt_trunk.step(actor.trunk, trunk_grads);
  return -objective;
}

struct EpisodeStat {
  int episode = 0;
  double episode_return = 0.0;
  bool success = false;
  int length = 0;
};

struct TrainResult {
  MlpPolicy policy;
  std::vector<EpisodeStat> curve;
};

namespace detail {

inline PolicyObservation observe(const world::UavState& s, const world::Environment& env,
                                 double d_scale) {
  const auto scan = world::ray_depth(s, env);
  const auto rel = policy::compute_rel(s.pos, s.yaw, {env.target, d_scale});
  return policy::make_observation(scan, rel, d_scale);
}

}  // namespace detail

/// Greedy rollout; returns true when the target is reached.
inline bool eval_episode(const MlpPolicy& pi, const world::Environment& env,
                         int max_steps = 400, double dt = world::kDefaultDt,
                         std::vector<world::UavState>* trace = nullptr) {
  const double d_scale = (env.target - env.start).norm();
  world::UavState s{env.start,
                    std::atan2(env.target.y_north_m - env.start.y_north_m,
                               env.target.x_east_m - env.start.x_east_m),
                    0.0};
  for (int k = 0; k < max_steps; ++k) {
    if (trace) trace->push_back(s);
    const auto obs = detail::observe(s, env, d_scale);
    s = world::step_kinematics(s, pi.forward(obs), dt);
    if (world::check_collision(s, env).collided) return false;
    if ((env.target - s.pos).norm() <= env.goal_radius) return true;
    if (!env.bounds.contains(s.pos)) return false;
  }
  return false;
}

/// Full TD3 training loop with a two-phase curriculum: obstacle-free first,
/// then a single laterally jittered obstacle per episode.
inline TrainResult train(const world::Environment& base_env, const Td3Config& cfg,
                         const RewardConfig& rc = {}) {
  std::mt19937_64 rng(cfg.seed);
  const int n_rays = world::kDefaultNumRays;

  MlpPolicy actor = MlpPolicy::random(n_rays, cfg.branch_hidden, cfg.trunk_hidden,
                                      cfg.seed + 11);
  MlpPolicy actor_target = actor;
  CriticPair critics;
  critics.q1 = Critic::random(n_rays, cfg.branch_hidden, cfg.trunk_hidden, cfg.seed + 21);
  critics.q2 = Critic::random(n_rays, cfg.branch_hidden, cfg.trunk_hidden, cfg.seed + 31);
  critics.q1_target = critics.q1;
  critics.q2_target = critics.q2;

  mlp::Adam opt_ab(cfg.learning_rate), opt_at(cfg.learning_rate);
  mlp::Adam opt_q1b(cfg.learning_rate), opt_q1t(cfg.learning_rate);
  mlp::Adam opt_q2b(cfg.learning_rate), opt_q2t(cfg.learning_rate);

  ReplayBuffer buffer(100000, cfg.seed + 41);
  std::normal_distribution<double> expl(0.0, cfg.exploration_sigma);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  TrainResult result;
  result.policy = actor;

  long step = 0;
  int episode = 0;
  long critic_steps = 0;
  while (step < cfg.total_steps) {
    // per-episode environment (curriculum)
    world::Environment env = base_env;
    const bool phase1 = step < static_cast<long>(cfg.curriculum_frac * cfg.total_steps);
    if (phase1) {
      env.obstacles.clear();
    } else if (!env.obstacles.empty()) {
      // jitter the obstacle laterally w.r.t. the start->target axis
      const geo::LocalPos axis = env.target - env.start;
      const double len = axis.norm();
      const geo::LocalPos perp{-axis.y_north_m / len, axis.x_east_m / len};
      const double off = uni(rng) * cfg.obstacle_jitter;
      env.obstacles[0].center = env.obstacles[0].center + off * perp;
    }

    const double d_scale = (env.target - env.start).norm();
    world::UavState s{env.start,
                      std::atan2(env.target.y_north_m - env.start.y_north_m,
                                 env.target.x_east_m - env.start.x_east_m),
                      0.0};
    PolicyObservation obs = detail::observe(s, env, d_scale);
    EpisodeStat stat;
    stat.episode = episode;
    std::vector<double> episode_rewards;

    for (int k = 0; k < cfg.max_episode_steps && step < cfg.total_steps; ++k, ++step) {
      Vector2d a;
      if (step < cfg.start_steps) {
        a = {uni(rng), uni(rng)};
      } else {
        a = actor.forward_normalized(obs);
        a(0) = std::clamp(a(0) + expl(rng), -1.0, 1.0);
        a(1) = std::clamp(a(1) + expl(rng), -1.0, 1.0);
      }

      const world::UavState next = world::step_kinematics(s, actor.to_action(a),
                                                          world::kDefaultDt);
      const double r = reward(s, next, env, rc);
      const bool collided = world::check_collision(next, env).collided;
      const bool reached = (env.target - next.pos).norm() <= env.goal_radius;
      const bool out = !env.bounds.contains(next.pos);
      const bool done = collided || reached || out;

      PolicyObservation next_obs;
      if ((env.target - next.pos).norm() > 0.0) {
        next_obs = detail::observe(next, env, d_scale);
      } else {
        next_obs = obs;
      }

      Transition t;
      t.depth = policy::depth_vector(obs);
      t.scalars = {obs.d_rel_norm, obs.yaw_rel_norm};
      t.action = a;
      t.reward = r;
      t.next_depth = policy::depth_vector(next_obs);
      t.next_scalars = {next_obs.d_rel_norm, next_obs.yaw_rel_norm};
      t.done = done;
      buffer.push(std::move(t));

      episode_rewards.push_back(r);
      stat.episode_return += r;
      ++stat.length;
      s = next;
      obs = next_obs;

      if (step >= cfg.update_after &&
          buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
        const Batch batch =
            gather(buffer, buffer.sample_indices(static_cast<std::size_t>(cfg.batch_size)));
        critic_update(batch, critics, actor_target, cfg, rng, opt_q1b, opt_q1t,
                      opt_q2b, opt_q2t);
        ++critic_steps;
        if (critic_steps % cfg.policy_delay == 0) {
          actor_update(batch, actor, critics.q1, opt_ab, opt_at);
          mlp::polyak_update(actor.depth_branch, actor_target.depth_branch, cfg.polyak);
          mlp::polyak_update(actor.trunk, actor_target.trunk, cfg.polyak);
          mlp::polyak_update(critics.q1.branch, critics.q1_target.branch, cfg.polyak);
          mlp::polyak_update(critics.q1.trunk, critics.q1_target.trunk, cfg.polyak);
          mlp::polyak_update(critics.q2.branch, critics.q2_target.branch, cfg.polyak);
          mlp::polyak_update(critics.q2.trunk, critics.q2_target.trunk, cfg.polyak);
        }
      }

      if (done) {
        stat.success = reached;
        break;
      }
    }
    result.curve.push_back(stat);
    ++episode;
  }
  result.policy = actor;
  return result;
}

}  // namespace uavsim::td3
