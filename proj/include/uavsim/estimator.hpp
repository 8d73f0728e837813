#pragma once

// Constant-velocity EKF over planar position with GPS position fusion,
// innovation gating and spoof-suspicion monitoring. Only the gate behavior of
// the autopilot's estimator is modeled; IMU-grade attitude estimation is out
// of scope.
//
// The test ratio is the normalized innovation squared divided by the squared
// gate size; a measurement with test ratio above 1 is rejected and leaves the
// state identical to the prediction.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <variant>

#include "uavsim/geo.hpp"

namespace uavsim::estimator {

using geo::LocalPos;
using Mat4 = Eigen::Matrix4d;
using Mat2 = Eigen::Matrix2d;
using Vec4 = Eigen::Vector4d;
using Vec2 = Eigen::Vector2d;

struct SingularInnovationCovariance : std::runtime_error {
  SingularInnovationCovariance()
      : std::runtime_error("innovation covariance is not invertible") {}
};
struct NoConvergence : std::runtime_error {
  NoConvergence() : std::runtime_error("steady-state iteration did not converge") {}
};

// State layout: [x, y, vx, vy].
struct EkfEstimate {
  LocalPos pos{};
  Vec2 vel = Vec2::Zero();
  Mat4 cov = Mat4::Identity();
  double t = 0.0;

  [[nodiscard]] Vec4 state() const {
    return {pos.x_east_m, pos.y_north_m, vel.x(), vel.y()};
  }
  void set_state(const Vec4& x) {
    pos = {x(0), x(1)};
    vel = {x(2), x(3)};
  }
};

struct FusionConfig {
  double q_accel = 0.05;   // m/s^2 process-noise intensity
  double r_gps = 1.5;      // m GPS position noise std
  double gate = 3.0;       // dimensionless gate size
  int reject_window = 10;  // consecutive rejections before spoof suspicion
  double gps_rate_hz = 10.0;
};

struct FusionOutcome {
  EkfEstimate est;
  Vec2 innovation = Vec2::Zero();
  double test_ratio = 0.0;
  bool accepted = true;
};

struct Healthy {};
struct Rejecting {
  int count = 0;
};
struct SpoofSuspected {};
using HealthStatus = std::variant<Healthy, Rejecting, SpoofSuspected>;

inline bool is_spoof_suspected(const HealthStatus& h) {
  return std::holds_alternative<SpoofSuspected>(h);
}
inline bool is_healthy(const HealthStatus& h) {
  return std::holds_alternative<Healthy>(h);
}

inline Mat4 transition_matrix(double dt) {
  Mat4 f = Mat4::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

/// Discrete white-noise-acceleration process covariance.
inline Mat4 process_noise(double q_accel, double dt) {
  const double q2 = q_accel * q_accel;
  const double d2 = dt * dt, d3 = d2 * dt, d4 = d3 * dt;
  Mat4 q = Mat4::Zero();
  q(0, 0) = q(1, 1) = q2 * d4 / 4.0;
  q(2, 2) = q(3, 3) = q2 * d2;
  q(0, 2) = q(2, 0) = q(1, 3) = q(3, 1) = q2 * d3 / 2.0;
  return q;
}

inline EkfEstimate predict(const EkfEstimate& e, double dt,
                           const FusionConfig& cfg) {
  const Mat4 f = transition_matrix(dt);
  EkfEstimate out = e;
  out.set_state(f * e.state());
  out.cov = f * e.cov * f.transpose() + process_noise(cfg.q_accel, dt);
  out.t = e.t + dt;
  return out;
}

/// Prediction with the autopilot's own motion knowledge: the velocity state is
/// replaced by the commanded velocity before constant-velocity propagation.
/// This stands in for the IMU branch of the real estimator, so that benign
/// maneuvers do not show up as GPS innovations.
inline EkfEstimate predict_with_control(const EkfEstimate& e, const Vec2& vel_cmd,
                                        double dt, const FusionConfig& cfg) {
  EkfEstimate aided = e;
  aided.vel = vel_cmd;
  return predict(aided, dt, cfg);
}

inline FusionOutcome fuse_gps(const EkfEstimate& e_pred, const LocalPos& z,
                              const FusionConfig& cfg) {
  static const Eigen::Matrix<double, 2, 4> h = [] {
    Eigen::Matrix<double, 2, 4> m = Eigen::Matrix<double, 2, 4>::Zero();
    m(0, 0) = m(1, 1) = 1.0;
    return m;
  }();

  FusionOutcome out;
  out.est = e_pred;
  out.innovation = Vec2(z.x_east_m - e_pred.pos.x_east_m,
                        z.y_north_m - e_pred.pos.y_north_m);

  const Mat2 r = Mat2::Identity() * (cfg.r_gps * cfg.r_gps);
  const Mat2 s = h * e_pred.cov * h.transpose() + r;
  Eigen::FullPivLU<Mat2> lu(s);
  if (!lu.isInvertible()) throw SingularInnovationCovariance{};
  const Mat2 s_inv = lu.inverse();

  out.test_ratio = out.innovation.dot(s_inv * out.innovation) / (cfg.gate * cfg.gate);
  out.accepted = out.test_ratio <= 1.0;
  if (!out.accepted) return out;  // rejected: estimate stays the prediction

  const Eigen::Matrix<double, 4, 2> k = e_pred.cov * h.transpose() * s_inv;
  out.est.set_state(e_pred.state() + k * out.innovation);
  const Mat4 ikh = Mat4::Identity() - k * h;
  out.est.cov = ikh * e_pred.cov * ikh.transpose() + k * r * k.transpose();
  out.est.cov = 0.5 * (out.est.cov + out.est.cov.transpose());
  return out;
}

inline HealthStatus monitor(const HealthStatus& prev, const FusionOutcome& outcome,
                            const FusionConfig& cfg) {
  if (outcome.accepted) return Healthy{};
  int count = 1;
  if (const auto* r = std::get_if<Rejecting>(&prev)) count = r->count + 1;
  if (std::holds_alternative<SpoofSuspected>(prev)) return SpoofSuspected{};
  if (count >= cfg.reject_window) return SpoofSuspected{};
  return Rejecting{count};
}

struct SteadyState {
  Eigen::Matrix<double, 4, 2> gain;
  Mat2 innovation_cov;
  Mat4 cov;
  int iterations = 0;
};

/// Iterates predict/fuse with zero innovation until the covariance converges.
inline SteadyState steady_state_gain(const FusionConfig& cfg, double dt) {
  EkfEstimate e;
  e.cov = Mat4::Identity();
  static const Eigen::Matrix<double, 2, 4> h = [] {
    Eigen::Matrix<double, 2, 4> m = Eigen::Matrix<double, 2, 4>::Zero();
    m(0, 0) = m(1, 1) = 1.0;
    return m;
  }();
  const Mat2 r = Mat2::Identity() * (cfg.r_gps * cfg.r_gps);
  SteadyState out;
  for (int i = 0; i < 100000; ++i) {
    const Mat4 prev = e.cov;
    EkfEstimate p = predict(e, dt, cfg);
    const Mat2 s = h * p.cov * h.transpose() + r;
    const Eigen::Matrix<double, 4, 2> k = p.cov * h.transpose() * s.inverse();
    const Mat4 ikh = Mat4::Identity() - k * h;
    e.cov = ikh * p.cov * ikh.transpose() + k * r * k.transpose();
    if ((e.cov - prev).cwiseAbs().maxCoeff() < 1e-12) {
      out.gain = k;
      out.innovation_cov = s;
      out.cov = e.cov;
      out.iterations = i + 1;
      return out;
    }
  }
  throw NoConvergence{};
}

}  // namespace uavsim::estimator
