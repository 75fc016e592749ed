#include "support.hpp"
#include "teleop/operators.hpp"

#include <gtest/gtest.h>

namespace teleop {
namespace {

TEST(MinJerk, EndpointsAndMidpoint) {
  const Vec3 a(0, 0, 0), b(0.3, -0.1, 0.2);
  EXPECT_EQ(min_jerk(a, b, 1.0, 0.0), a);
  EXPECT_EQ(min_jerk(a, b, 1.0, 1.0), b);
  EXPECT_NEAR((min_jerk(a, b, 1.0, 0.5) - 0.5 * (a + b)).norm(), 0.0, 1e-15);
  EXPECT_EQ(min_jerk(a, b, 1.0, 5.0), b);
}

TEST(MinJerk, BellShapedSpeed) {
  const Vec3 a(0, 0, 0), b(0.3, 0, 0);
  EXPECT_EQ(min_jerk_velocity(a, b, 1.0, 0.0), Vec3::Zero());
  EXPECT_EQ(min_jerk_velocity(a, b, 1.0, 1.0), Vec3::Zero());
  int maxima = 0;
  double prev = 0.0, cur = min_jerk_velocity(a, b, 1.0, 0.001).norm();
  for (int k = 2; k < 1000; ++k) {
    const double next = min_jerk_velocity(a, b, 1.0, k * 0.001).norm();
    if (cur > prev && cur > next) ++maxima;
    prev = cur;
    cur = next;
  }
  EXPECT_EQ(maxima, 1);
  EXPECT_NEAR(min_jerk_velocity(a, b, 1.0, 0.5).x(), 1.875 * 0.3, 1e-12);
}

TEST(MinJerk, VelocityIsDerivative) {
  const Vec3 a(0.1, 0, 0), b(0.3, -0.2, 0.1);
  const double h = 1e-6;
  for (double t : {0.1, 0.33, 0.7}) {
    const Vec3 fd = (min_jerk(a, b, 1.5, t + h) - min_jerk(a, b, 1.5, t - h)) / (2 * h);
    EXPECT_LT((min_jerk_velocity(a, b, 1.5, t) - fd).norm(), 1e-8);
  }
}

struct Scene {
  KinematicParams kin;
  FrameMap map;
  PoseLibrary poses;
  WorldView view;
  Scene() {
    view.points = forward_kinematics(poses.joints(PoseId::Base), kin);
    view.target = poses.target(PoseId::Hat, kin);
    view.phase = TrialPhase::Reaching;
    view.leader_pos = Vec3(0.05, -0.05, 0.03);
  }
};

TEST(TrainerPolicy, StartsByApproachingElbowWithGripOpen) {
  Scene sc;
  const auto step = trainer_policy_step({}, sc.view, 1.0, {}, sc.map);
  EXPECT_EQ(step.state.phase, TrainerPhase::Approach);
  EXPECT_EQ(step.state.point, PointId::Elbow);
  EXPECT_FALSE(step.command.grip);
}

TEST(TrainerPolicy, IdleWhenTrialNotActive) {
  Scene sc;
  TrainerState s;
  s.phase = TrainerPhase::Transport;
  s.grip = true;
  for (auto phase : {TrialPhase::Confirmed, TrialPhase::Done}) {
    sc.view.phase = phase;
    const auto step = trainer_policy_step(s, sc.view, 1.0, {}, sc.map);
    EXPECT_EQ(step.state.phase, TrainerPhase::Idle);
    EXPECT_FALSE(step.command.grip);
  }
}

TEST(TrainerPolicy, SettledElbowIsReleasedThenWristApproached) {
  Scene sc;
  TrainerState s;
  s.phase = TrainerPhase::Hold;
  s.point = PointId::Elbow;
  s.phase_t0 = 0.0;
  s.seg_end = map_follower_to_leader(sc.view.target.elbow_target, sc.map);
  sc.view.grab = {GrabPhase::Engaged, PointId::Elbow};
  sc.view.points.elbow = sc.view.target.elbow_target + Vec3(0.03, 0, 0);
  sc.view.leader_pos = s.seg_end;
  double t = 0.0;
  TrainerStep step{s, {}};
  while (step.state.phase == TrainerPhase::Hold && t < 2.0) {
    t += 0.002;
    step = trainer_policy_step(step.state, sc.view, t, {}, sc.map);
  }
  EXPECT_EQ(step.state.phase, TrainerPhase::Release);
  EXPECT_NEAR(t, 0.502, 1e-9);
  EXPECT_FALSE(step.command.grip);
  sc.view.grab = {};
  while (step.state.phase != TrainerPhase::Approach && t < 2.0) {
    t += 0.002;
    step = trainer_policy_step(step.state, sc.view, t, {}, sc.map);
  }
  EXPECT_EQ(step.state.phase, TrainerPhase::Approach);
  EXPECT_EQ(step.state.point, PointId::Wrist);
}

TEST(TrainerPolicy, NeverClosesGripOutsideRadius) {
  // Closed-loop with the coupling: every closing edge lands within range.
  Scene sc;
  Xoshiro256 rng(71);
  CouplingParams coupling;
  for (int trial = 0; trial < 20; ++trial) {
    TrainerState s;
    sc.view.leader_pos = testing::random_vec(rng, -0.05, 0.05);
    sc.view.grab = {};
    CouplingState cs;
    bool prev_grip = false;
    for (int k = 0; k < 3000; ++k) {
      const double t = k * 0.002;
      const auto step = trainer_policy_step(s, sc.view, t, {}, sc.map);
      s = step.state;
      const Vec3 mapped = map_leader_to_follower(step.command.target, sc.map);
      if (step.command.grip && !prev_grip) {
        const double d = std::min((mapped - sc.view.points.elbow).norm(), (mapped - sc.view.points.wrist).norm());
        EXPECT_LE(d, 0.10);
      }
      prev_grip = step.command.grip;
      cs = update_grab_state(cs, mapped, step.command.grip, sc.view.points, coupling);
      sc.view.grab = cs.grab;
      sc.view.leader_pos = step.command.target;
    }
  }
}

TEST(TraineePolicy, Examples) {
  TraineeParams p;
  PoseTarget target;
  target.q_target = (Joints() << 0.1, 0.3, 0, 0.9, 0, 0).finished();
  EXPECT_EQ(vd_trainee_policy(Joints::Zero(), Joints::Zero(), target, 0.5, p), Joints::Zero());
  EXPECT_EQ(vd_trainee_policy(target.q_target, Joints::Zero(), target, 2.0, p), Joints::Zero());
  Joints q = target.q_target;
  q[3] -= 0.5;
  const Joints tau = vd_trainee_policy(q, Joints::Zero(), target, 2.0, p);
  EXPECT_NEAR(tau[3], 4.0, 1e-12);
  EXPECT_NEAR(tau.norm(), 4.0, 1e-12);
}

TEST(TraineePolicy, ImitationErrorDecays) {
  TraineeParams p;
  PoseTarget target;
  Joints err = Joints::Zero();
  err[1] = 0.2;
  const Joints early = vd_trainee_policy(Joints::Zero(), Joints::Zero(), target, p.reaction_s, p, err);
  EXPECT_NEAR(early[1], 8.0 * 0.2, 1e-12);
  const Joints late = vd_trainee_policy(Joints::Zero(), Joints::Zero(), target, p.reaction_s + p.correction_s, p, err);
  EXPECT_NEAR(late[1], 8.0 * 0.2 * std::exp(-1.0), 1e-12);
}

TEST(TraineeSupport, CarriesUncompensatedWeight) {
  KinematicParams kin;
  PlantParams plant;
  TraineeParams t;
  Xoshiro256 rng(72);
  for (int n = 0; n < 50; ++n) {
    const Joints q = testing::random_joints(rng);
    const Joints net = trainee_support_torques(q, t, plant, kin) + baseline_torques(q, Joints::Zero(), plant, kin) +
                       gravity_torques(q, kin);
    EXPECT_LT(net.norm(), 1e-12);
  }
}

}  // namespace
}  // namespace teleop
