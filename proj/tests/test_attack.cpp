#include <gtest/gtest.h>

#include <numbers>

#include "uavsim/attack.hpp"

using namespace uavsim::attack;
using uavsim::geo::LocalPos;
using uavsim::policy::PolicyObservation;
using uavsim::world::Action;
using uavsim::world::DepthScan;
using uavsim::world::UavState;

namespace {
constexpr double kPi = std::numbers::pi;

DepthScan clear_scan(int n = 16) {
  DepthScan s;
  s.ranges.assign(static_cast<std::size_t>(n), 1.0);
  return s;
}
}  // namespace

TEST(ConditionCollision, HeadOnFullSpeed) {
  const UavState uav{{0.0, 0.0}, kPi / 2.0, 0.0};
  const Action a{5.0, 0.0};  // keeps heading at the obstacle bearing
  EXPECT_TRUE(condition_collision(a, uav, {0.0, 10.0}));
}

TEST(ConditionCollision, ZeroSpeedNeverSatisfies) {
  const UavState uav{{0.0, 0.0}, kPi / 2.0, 0.0};
  EXPECT_FALSE(condition_collision({0.0, 0.0}, uav, {0.0, 10.0}));
}

TEST(ConditionCollision, JustOutsideToleranceFails) {
  const UavState uav{{0.0, 0.0}, 0.0, 0.0};
  // obstacle dead ahead; post-action heading offset = theta_tol + 0.01
  const double dt = uavsim::world::kDefaultDt;
  const Action inside{5.0, (kDefaultThetaTol - 0.01) / dt};
  const Action outside{5.0, (kDefaultThetaTol + 0.01) / dt};
  EXPECT_TRUE(condition_collision(inside, uav, {10.0, 0.0}));
  EXPECT_FALSE(condition_collision(outside, uav, {10.0, 0.0}));
}

TEST(UnconstrainedSearch, FindsSpoofSteeringIntoObstacle) {
  // surrogate policy; obstacle ahead within sensor range, target behind
  const UavState uav{{0.0, 0.0}, kPi / 2.0, 0.0};
  uavsim::world::Environment env;
  env.obstacles.push_back({{0.0, 15.0}, 5.0});
  const auto scan = uavsim::world::ray_depth(uav, env);
  const uavsim::policy::TargetSpec tgt{{0.0, 150.0}, 150.0};

  PolicyFn pi = [&](const PolicyObservation& o) {
    return uavsim::policy::surrogate(o, scan);
  };
  const auto out = unconstrained_search(pi, scan, uav, tgt, {50.0, 1.0},
                                        env.obstacles[0].center);
  ASSERT_TRUE(out.found);
  // self-verifying postcondition: the induced action satisfies the condition
  const auto rel = uavsim::policy::compute_rel(out.position, uav.yaw, tgt);
  const auto obs = uavsim::policy::make_observation(scan, rel, tgt.d_scale);
  EXPECT_TRUE(condition_collision(pi(obs), uav, env.obstacles[0].center));
}

TEST(UnconstrainedSearch, ZeroRadiusTestsOnlyTruePosition) {
  const UavState uav{{3.0, 4.0}, 0.0, 0.0};
  const auto scan = clear_scan();
  int calls = 0;
  PolicyFn pi = [&](const PolicyObservation&) {
    ++calls;
    return Action{0.0, 0.0};
  };
  const auto out = unconstrained_search(pi, scan, uav, {{50.0, 0.0}, 50.0}, {0.0, 1.0},
                                        {10.0, 0.0});
  EXPECT_EQ(calls, 1);
  EXPECT_FALSE(out.found);
  EXPECT_DOUBLE_EQ(out.best_effort.x_east_m, 3.0);
  EXPECT_DOUBLE_EQ(out.best_effort.y_north_m, 4.0);
}

TEST(UnconstrainedSearch, ZeroSpeedPolicyNeverFound) {
  const UavState uav{{0.0, 0.0}, 0.0, 0.0};
  const auto scan = clear_scan();
  PolicyFn pi = [](const PolicyObservation&) { return Action{0.0, 0.3}; };
  const auto out =
      unconstrained_search(pi, scan, uav, {{50.0, 0.0}, 50.0}, {10.0, 1.0}, {10.0, 0.0});
  EXPECT_FALSE(out.found);
}

TEST(SpoofSignal, NullAttackEchoesTruth) {
  AttackState st;
  st.observed_truth = {7.0, -3.0};
  const auto sig = spoof_signal(st, {{0.0, 0.0}, 2, SpoofMode::Constrained});
  ASSERT_EQ(sig.size(), 2u);
  for (const auto& s : sig) {
    EXPECT_DOUBLE_EQ(s.x_east_m, 7.0);
    EXPECT_DOUBLE_EQ(s.y_north_m, -3.0);
  }
  EXPECT_EQ(st.n, 1);
}

TEST(SpoofSignal, RunningSumAccumulates) {
  AttackState st;
  st.observed_truth = {0.0, 0.0};
  (void)spoof_signal(st, {{0.0, 0.1}, 1, SpoofMode::Constrained});
  const auto second = spoof_signal(st, {{0.0, 0.1}, 1, SpoofMode::Constrained});
  ASSERT_EQ(second.size(), 1u);
  EXPECT_NEAR(second[0].y_north_m, 0.2, 1e-12);
  EXPECT_NEAR(st.cumulative.y_north_m, 0.2, 1e-12);
}

TEST(SpoofSignal, ThirtyStepsReachThreeMeters) {
  AttackState st;
  st.observed_truth = {0.0, 0.0};
  for (int i = 0; i < 30; ++i) (void)spoof_signal(st, {{0.0, 0.1}, 1, SpoofMode::Constrained});
  EXPECT_NEAR(st.cumulative.y_north_m, 3.0, 1e-12);
  EXPECT_NEAR(st.cumulative.y_north_m / 111000.0, 2.7027027027e-05, 1e-12);
  EXPECT_EQ(st.n, 30);
}

TEST(SpoofSignal, CumulativeEqualsExactSumProperty) {
  AttackState st;
  LocalPos sum{};
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> d(-0.1, 0.1);
  for (int i = 0; i < 200; ++i) {
    const LocalPos dp{d(rng), d(rng)};
    sum = sum + dp;
    (void)spoof_signal(st, {dp, 1, SpoofMode::Constrained});
  }
  EXPECT_DOUBLE_EQ(st.cumulative.x_east_m, sum.x_east_m);
  EXPECT_DOUBLE_EQ(st.cumulative.y_north_m, sum.y_north_m);
}

TEST(ConstrainedStep, AlignedGeometry) {
  const auto d = constrained_step({0.0, 100.0}, {0.0, 150.0}, 0.1);
  EXPECT_NEAR(d.delta_p.x_east_m, 0.0, 1e-12);
  EXPECT_NEAR(d.delta_p.y_north_m, -0.1, 1e-12);
}

TEST(ConstrainedStep, OffsetTargetGeometry) {
  const auto d = constrained_step({0.0, 100.0}, {30.0, 150.0}, 0.1);
  EXPECT_NEAR(d.delta_p.x_east_m, -0.0514, 5e-4);
  EXPECT_NEAR(d.delta_p.y_north_m, -0.0857, 5e-4);
}

TEST(ConstrainedStep, ZeroStepIsZeroDirective) {
  const auto d = constrained_step({0.0, 100.0}, {0.0, 150.0}, 0.0);
  EXPECT_DOUBLE_EQ(d.delta_p.x_east_m, 0.0);
  EXPECT_DOUBLE_EQ(d.delta_p.y_north_m, 0.0);
}

TEST(ConstrainedStep, DegenerateGeometryThrows) {
  EXPECT_THROW((void)constrained_step({5.0, 5.0}, {5.0, 5.0}, 0.1), DegenerateDirection);
}

TEST(ConstrainedStep, NormNeverExceedsStep) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> d(-100.0, 100.0);
  for (int i = 0; i < 200; ++i) {
    const LocalPos col{d(rng), d(rng)}, tar{d(rng), d(rng)};
    if ((col - tar).norm() < 1e-9) continue;
    EXPECT_NEAR(constrained_step(col, tar, 0.1).delta_p.norm(), 0.1, 1e-12);
  }
}

TEST(ConstrainedStep, SignFlippedVariantIsOpposite) {
  const auto printed = constrained_step({0.0, 100.0}, {30.0, 150.0}, 0.1,
                                        SpoofHeading::ObstacleMinusTarget);
  const auto flipped = constrained_step({0.0, 100.0}, {30.0, 150.0}, 0.1,
                                        SpoofHeading::TargetMinusObstacle);
  EXPECT_NEAR(printed.delta_p.x_east_m, -flipped.delta_p.x_east_m, 1e-12);
  EXPECT_NEAR(printed.delta_p.y_north_m, -flipped.delta_p.y_north_m, 1e-12);
}

TEST(ReflectionDelay, TunedDefaultsAbsorbThreeMeters) {
  const uavsim::estimator::FusionConfig cfg;
  const auto out = measure_reflection_delay(cfg, {0.0, 3.3});
  EXPECT_GE(out.samples, 15);
  EXPECT_LE(out.samples, 60);
  EXPECT_LT(out.max_test_ratio, 1.0);
}

TEST(ReflectionDelay, ZeroOffsetIsInstant) {
  const uavsim::estimator::FusionConfig cfg;
  const auto out = measure_reflection_delay(cfg, {0.0, 0.0});
  EXPECT_EQ(out.samples, 0);
}

TEST(ReflectionDelay, FiftyMetersGatedForever) {
  const uavsim::estimator::FusionConfig cfg;
  EXPECT_THROW((void)measure_reflection_delay(cfg, {0.0, 50.0}), NeverConverges);
}

TEST(Envelope, TunedDefaultsBracketOneMeterPerSecond) {
  const uavsim::estimator::FusionConfig cfg;
  const auto report = max_undetected_rate(cfg);
  EXPECT_GE(report.max_rate_mps, 0.5);
  EXPECT_LE(report.max_rate_mps, 2.0);
  EXPECT_LT(report.run_max_test_ratio, 1.0);
}

TEST(Envelope, TinyMeasurementNoiseKillsTheRate) {
  uavsim::estimator::FusionConfig cfg;
  cfg.r_gps = 1e-3;
  const auto report = max_undetected_rate(cfg);
  EXPECT_LT(report.max_rate_mps, 0.05);
}

TEST(Envelope, WiderGateAdmitsFasterDrift) {
  uavsim::estimator::FusionConfig narrow, wide;
  wide.gate = narrow.gate * 2.0;
  EXPECT_GT(max_undetected_rate(wide).max_rate_mps,
            max_undetected_rate(narrow).max_rate_mps);
}

TEST(Envelope, FeasibleRateStaysHealthyEverySample) {
  const uavsim::estimator::FusionConfig cfg;
  const auto report = max_undetected_rate(cfg);
  // replay the drift at the returned rate through the monitor
  const double dt = 1.0 / cfg.gps_rate_hz;
  uavsim::estimator::EkfEstimate est;
  est.cov = uavsim::estimator::steady_state_gain(cfg, dt).cov;
  uavsim::estimator::HealthStatus h = uavsim::estimator::Healthy{};
  for (int i = 1; i <= 600; ++i) {
    const auto pred = uavsim::estimator::predict(est, dt, cfg);
    const auto out =
        uavsim::estimator::fuse_gps(pred, {0.0, report.max_rate_mps * i * dt}, cfg);
    EXPECT_TRUE(out.accepted);
    h = uavsim::estimator::monitor(h, out, cfg);
    EXPECT_TRUE(uavsim::estimator::is_healthy(h));
    est = out.est;
  }
}
