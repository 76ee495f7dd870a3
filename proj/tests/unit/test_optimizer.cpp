#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "rigrecon/error.hpp"
#include "rigrecon/evaluation.hpp"
#include "rigrecon/optimizer.hpp"
#include "rigrecon/problem.hpp"

using namespace rigrecon;
using testing_support::small_config;

namespace {

std::vector<RigidTransform> extrinsics_of(const CalibrationResult& r) {
  std::vector<RigidTransform> out;
  for (const auto& c : r.cameras) out.push_back(c.extrinsics);
  return out;
}

SolveConfig quick_config() {
  SolveConfig c;
  c.optimizer.max_iterations = 300;
  c.optimizer.refine_iterations = 20;
  return c;
}

/// Every stored number of a parameter block, in a fixed order.
std::vector<double> flat(const ParameterBlock& p) {
  std::vector<double> out;
  auto pose = [&](const RigidTransform& t) {
    const Mat4 m = t.matrix();
    out.insert(out.end(), m.data(), m.data() + 16);
  };
  for (const auto& t : p.poses) pose(t);
  out.insert(out.end(), p.log_sigma.begin(), p.log_sigma.end());
  for (const auto& k : p.intrinsics) out.insert(out.end(), {k.fx, k.fy, k.cx, k.cy});
  out.insert(out.end(), p.log_lambda.begin(), p.log_lambda.end());
  for (const auto& t : p.extrinsics) pose(t);
  return out;
}

void expect_code(ErrorCode code, const auto& fn) {
  try {
    fn();
    FAIL() << "expected " << error_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

void expect_same_result(const CalibrationResult& a, const CalibrationResult& b) {
  ASSERT_EQ(a.cameras.size(), b.cameras.size());
  for (size_t j = 0; j < a.cameras.size(); ++j) {
    EXPECT_EQ(a.cameras[j].extrinsics.matrix(), b.cameras[j].extrinsics.matrix());
    EXPECT_EQ(a.cameras[j].lambda, b.cameras[j].lambda);
  }
  EXPECT_EQ(flat(a.parameters), flat(b.parameters));
  EXPECT_EQ(a.log.loss, b.log.loss);
  EXPECT_EQ(a.cloud, b.cloud);
}

}  // namespace

TEST(Optimizer, InitializationLandsNearTruth) {
  const Scenario s = generate(small_config(false, 1));
  const Initialization init = initialize(make_problem(s.archive, s.trajectory));
  ASSERT_EQ(init.cameras.size(), 1u);
  EXPECT_FALSE(init.cameras[0].handeye_fallback);
  const RigidTransform x = init.params.extrinsics[0];
  const CalibErrors e = calib_errors(std::vector<RigidTransform>{x}, s.truth.extrinsics);
  EXPECT_LE(e.translation, 0.05);
  EXPECT_LE(e.rotation, 0.1);
  EXPECT_NEAR(init.params.lambda(0), 2.5, 0.1);
  EXPECT_TRUE(init.frozen.pose[init.anchors[0]]);
}

TEST(Optimizer, PlanarRigFreezesTheVerticalAxis) {
  const Scenario s = generate(small_config(true, 2));
  const Initialization init = initialize(make_problem(s.archive, s.trajectory));
  for (size_t j = 0; j < init.cameras.size(); ++j) {
    EXPECT_TRUE(init.cameras[j].observability.axis_unobservable);
    ASSERT_TRUE(init.frozen.extrinsic_axis[j]);
    EXPECT_NEAR(std::abs(init.frozen.extrinsic_axis[j]->z()), 1.0, 1e-9);
  }
}

TEST(Optimizer, TooFewPosesIsRejected) {
  const Scenario s = generate(small_config(false, 3));
  Archive still = s.archive;
  for (auto& v : still.views) v.pose_index = 0;
  expect_code(ErrorCode::InsufficientPoses, [&] { make_problem(still, s.trajectory); });
}

TEST(Optimizer, TrajectoryMustCoverEveryView) {
  const Scenario s = generate(small_config(false, 3));
  RobotTrajectory shorter = s.trajectory;
  shorter.poses.pop_back();
  expect_code(ErrorCode::PoseIndexMismatch, [&] { make_problem(s.archive, shorter); });
}

TEST(Optimizer, DescentNeverIncreasesTheBestLoss) {
  ScenarioConfig c = small_config(false, 4);
  c.depth_noise = 0.01;
  const Scenario s = generate(c);
  const CalibrationProblem problem = make_problem(s.archive, s.trajectory);
  const Initialization init = initialize(problem);
  const LossEngine engine(problem);
  OptimizerConfig o;
  o.max_iterations = 150;
  ConvergenceLog log;
  const ParameterBlock out = minimize(engine, init.params, init.frozen, {}, o, log);
  ASSERT_FALSE(log.loss.empty());
  EXPECT_LE(static_cast<int>(log.loss.size()), o.max_iterations);
  EXPECT_TRUE(std::is_sorted(log.best.rbegin(), log.best.rend()));
  EXPECT_LE(log.final_loss, log.initial_loss);
  EXPECT_NEAR(engine.total_loss(out).total, log.final_loss, 1e-9 * std::max(1.0, log.final_loss));
  // Frozen coordinates stay put.
  const int anchor = init.anchors[0];
  EXPECT_EQ(out.poses[anchor].matrix(), init.params.poses[anchor].matrix());
  EXPECT_EQ(out.log_sigma[anchor], init.params.log_sigma[anchor]);
}

TEST(Optimizer, GroundTruthIsAFixedPoint) {
  const Scenario s = generate(small_config(false, 5));
  const CalibrationProblem problem = make_problem(s.archive, s.trajectory);
  const Initialization init = initialize(problem);
  const LossEngine engine(problem);
  const ParameterBlock truth = ground_truth_parameters(s);
  ConvergenceLog log;
  OptimizerConfig o;
  o.max_iterations = 50;
  const ParameterBlock out = refine(engine, truth, init.frozen, {}, o, log);
  EXPECT_LE(engine.total_loss(out).total, 1e-9);
  const auto a = flat(out);
  const auto b = flat(truth);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9) << i;
}

TEST(Optimizer, FrozenIntrinsicsDoNotMove) {
  ScenarioConfig c = small_config(false, 6);
  c.depth_noise = 0.01;
  const Scenario s = generate(c);
  const CalibrationProblem problem = make_problem(s.archive, s.trajectory);
  Initialization init = initialize(problem);
  init.frozen.intrinsics = true;
  const LossEngine engine(problem);
  OptimizerConfig o;
  o.max_iterations = 60;
  ConvergenceLog log;
  ParameterBlock out = minimize(engine, init.params, init.frozen, {}, o, log);
  out = refine(engine, out, init.frozen, {}, o, log);
  EXPECT_EQ(out.intrinsics[0].fx, init.params.intrinsics[0].fx);
  EXPECT_EQ(out.intrinsics[0].cy, init.params.intrinsics[0].cy);
}

TEST(Optimizer, NoiselessSolveRecoversTheRig) {
  const Scenario s = generate(small_config(false, 7));
  const CalibrationResult r = solve(s.archive, s.trajectory, quick_config());
  const CalibErrors e = calib_errors(extrinsics_of(r), s.truth.extrinsics);
  EXPECT_LE(e.translation, 1e-4);
  EXPECT_LE(e.rotation, 1e-5);
  EXPECT_NEAR(r.cameras[0].lambda / 2.5, 1.0, 1e-4);
  EXPECT_FALSE(r.cameras[0].z_unobservable);
  EXPECT_FALSE(r.cloud.empty());
}

TEST(Optimizer, SingleCameraResultIgnoresCrossMachinery) {
  ScenarioConfig c = small_config(false, 8);
  c.depth_noise = 0.01;
  const Scenario s = generate(c);
  SolveConfig on = quick_config();
  SolveConfig off = on;
  off.weights.cross_enabled = false;
  expect_same_result(solve(s.archive, s.trajectory, on), solve(s.archive, s.trajectory, off));
}

TEST(Optimizer, ThreadCountDoesNotChangeTheResult) {
  ScenarioConfig c = small_config(true, 9);
  c.depth_noise = 0.01;
  const Scenario s = generate(c);
  SolveConfig one = quick_config();
  one.optimizer.max_iterations = 80;
  SolveConfig three = one;
  three.threads = 3;
  expect_same_result(solve(s.archive, s.trajectory, one), solve(s.archive, s.trajectory, three));
}

TEST(Optimizer, PlanarSolveFlagsAndRestoresZ) {
  ScenarioConfig c = preset("memroc-like");
  c.poses = 5;
  c.ground_masks = true;
  c.seed = 10;
  const Scenario s = generate(c);
  const CalibrationResult r = solve(s.archive, s.trajectory, quick_config());
  for (size_t j = 0; j < r.cameras.size(); ++j) {
    EXPECT_TRUE(r.cameras[j].z_unobservable);
    EXPECT_LE(r.cameras[j].min_singular_value, 1e-6);
    ASSERT_TRUE(r.cameras[j].recovered_z);
    EXPECT_NEAR(r.cameras[j].lambda, 2.5, 1e-6);
    EXPECT_NEAR(r.cameras[j].extrinsics.translation.z(), s.truth.extrinsics[j].translation.z(), 1e-3);
  }
}

TEST(Optimizer, CollapsedScaleIsReported) {
  // Seed 10 of the small rig splits the registration graph and leaves one
  // camera with a single motion, so nothing pins its scale.
  ScenarioConfig c = small_config(true, 10);
  c.ground_masks = true;
  const Scenario s = generate(c);
  const CalibrationResult r = solve(s.archive, s.trajectory, quick_config());
  bool reported = false;
  for (const auto& w : r.warnings) reported |= w.find("probably unconstrained") != std::string::npos;
  EXPECT_TRUE(reported);
}

TEST(Optimizer, ConfigValidation) {
  const Scenario s = generate(small_config(false, 11));
  SolveConfig c = quick_config();
  c.threads = 0;
  expect_code(ErrorCode::InvalidConfig, [&] { solve(s.archive, s.trajectory, c); });
  c = quick_config();
  c.optimizer.step = -1.0;
  expect_code(ErrorCode::InvalidConfig, [&] { solve(s.archive, s.trajectory, c); });
}
