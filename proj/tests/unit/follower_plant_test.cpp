#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

namespace teleop {
namespace {

using testing::random_joints;

TEST(BaselineTorques, ZeroAtRestVertical) {
  EXPECT_EQ(baseline_torques(Joints::Zero(), Joints::Zero(), {}, {}).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BaselineTorques, SupportsFractionOfGravityLoad) {
  KinematicParams kin;
  Joints q = Joints::Zero();
  q[1] = std::numbers::pi / 2;
  const Joints tau = baseline_torques(q, Joints::Zero(), {}, kin);
  EXPECT_LT((tau + 0.65 * gravity_torques(q, kin)).norm(), 1e-12);
  EXPECT_GT(tau.norm(), 1.0);
}

TEST(BaselineTorques, FullCompensationCancelsGravityEverywhere) {
  KinematicParams kin;
  PlantParams p;
  p.weight_comp = 1.0;
  Xoshiro256 rng(41);
  for (int n = 0; n < 500; ++n) {
    const Joints q = random_joints(rng);
    EXPECT_EQ((baseline_torques(q, Joints::Zero(), p, kin) + gravity_torques(q, kin)).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(PlantStep, StationaryUnderFullCompensation) {
  KinematicParams kin;
  PlantParams p;
  p.weight_comp = 1.0;
  Xoshiro256 rng(42);
  for (int n = 0; n < 200; ++n) {
    FollowerState s;
    s.q = random_joints(rng);
    const auto next = plant_step(s, Joints::Zero(), Joints::Zero(), p, kin);
    EXPECT_LT((next.q - s.q).norm(), 1e-15);
    EXPECT_EQ(next.qdot, Joints::Zero());
  }
}

TEST(PlantStep, AdmittanceArithmetic) {
  KinematicParams kin;
  PlantParams p;
  p.weight_comp = 1.0;
  FollowerState s;
  s.q[3] = 1.0;
  Joints tau = Joints::Zero();
  tau[3] = 1.0;
  const auto next = plant_step(s, tau, Joints::Zero(), p, kin);
  EXPECT_NEAR(next.q[3] - s.q[3], 5.0e-4, 1e-15);
  EXPECT_NEAR(next.qdot[3], 0.25, 1e-15);
  EXPECT_NEAR(next.t, 0.002, 1e-15);
}

TEST(PlantStep, ClampsAtLimitAndZeroesVelocity) {
  KinematicParams kin;
  PlantParams p;
  p.weight_comp = 1.0;
  FollowerState s;
  s.q[3] = kin.limits.upper[3];
  Joints tau = Joints::Zero();
  tau[3] = 10.0;
  const auto next = plant_step(s, tau, Joints::Zero(), p, kin);
  EXPECT_EQ(next.q[3], kin.limits.upper[3]);
  EXPECT_EQ(next.qdot[3], 0.0);
}

TEST(PlantStep, NonFiniteTorqueFaults) {
  Joints tau = Joints::Zero();
  tau[2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(plant_step({}, tau, Joints::Zero(), {}, {}), PlantFault);
  EXPECT_THROW(plant_step({}, Joints::Zero(), tau, {}, {}), PlantFault);
}

TEST(PlantStep, RandomTorquesNeverViolateLimits) {
  KinematicParams kin;
  PlantParams p;
  Xoshiro256 rng(43);
  FollowerState s;
  s.q = random_joints(rng);
  for (int k = 0; k < 20000; ++k) {
    Joints tau;
    for (int i = 0; i < kNumJoints; ++i) tau[i] = rng.uniform(-60, 60);
    s = plant_step(s, tau, Joints::Zero(), p, kin);
    ASSERT_TRUE(kin.limits.contains(s.q));
    ASSERT_TRUE(s.qdot.allFinite());
  }
}

TEST(EngagedConvergence, ReachesMillimetreMonotonically) {
  const auto errors = testing::engaged_convergence_errors(5.0);
  ASSERT_EQ(errors.size(), 2500u);
  for (std::size_t k = 2; k < errors.size(); ++k) EXPECT_LE(errors[k], errors[k - 1]) << "step " << k;
  EXPECT_LT(errors.back(), 1e-3);
}

}  // namespace
}  // namespace teleop
