#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "gradient_check.hpp"
#include "loss_oracle.hpp"
#include "rigrecon/error.hpp"
#include "rigrecon/loss.hpp"

using namespace rigrecon;
using testing_support::small_config;

namespace {

struct Fixture {
  Scenario scenario;
  CalibrationProblem problem;
  ParameterBlock truth;
};

Fixture make_setup(bool multi, std::uint64_t seed, double noise = 0.0) {
  ScenarioConfig cfg = small_config(multi, seed);
  cfg.depth_noise = noise;
  Fixture s{generate(cfg), {}, {}};
  s.problem = make_problem(s.scenario.archive, s.scenario.trajectory);
  s.truth = ground_truth_parameters(s.scenario);
  return s;
}

}  // namespace

TEST(Loss, ZeroAtGroundTruthSingleCamera) {
  const Fixture s = make_setup(false, 3);
  const LossEngine engine(s.problem);
  const LossReport r = engine.total_loss(s.truth);
  EXPECT_GT(r.residuals_3d, 0u);
  EXPECT_GT(r.cal_terms, 0u);
  EXPECT_LE(r.total, 1e-9);
}

TEST(Loss, ZeroAtGroundTruthRig) {
  const Fixture s = make_setup(true, 4);
  const LossEngine engine(s.problem);
  const LossReport r = engine.total_loss(s.truth);
  EXPECT_EQ(engine.cross_pairs().size(), 3u);
  EXPECT_GT(r.cross_terms, 0u);
  EXPECT_LE(r.total, 1e-9);
  for (const auto& [pair, v] : r.lcross) EXPECT_LE(v, 1e-9);
}

TEST(Loss, MatchesOracleValue) {
  const Fixture s = make_setup(true, 5, 0.01);
  std::mt19937_64 rng(9);
  const ParameterBlock p = testing_support::jitter(s.truth, rng, 0.01);
  const LossEngine engine(s.problem);
  LossWeights w;
  w.w2d = 0.3;
  w.w_trans = 4.0;
  w.robust = true;
  const double engine_total = engine.total_loss(p, w).total;
  const double oracle_total = static_cast<double>(oracle::total(s.problem, oracle::to_long(p), w));
  EXPECT_NEAR(engine_total, oracle_total, 1e-9 * std::max(1.0, oracle_total));
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  for (int c = 0; c < 4; ++c) {
    const Fixture s = make_setup(c % 2 == 1, 20 + c, c < 2 ? 0.0 : 0.01);
    std::mt19937_64 rng(100 + c);
    const ParameterBlock p = testing_support::jitter(s.truth, rng, 0.01);
    const LossEngine engine(s.problem);
    LossWeights w;
    w.robust = c >= 2;
    w.w2d = 0.5;
    const auto check = testing_support::check_gradient(engine, p, w);
    EXPECT_EQ(check.failures, 0u) << "config " << c << " worst coordinate " << check.worst_index
                                  << " analytic " << check.worst_analytic << " numeric "
                                  << check.worst_numeric;
  }
}

TEST(Loss, TotalIsWeightedSumOfTerms) {
  const Fixture s = make_setup(true, 6, 0.01);
  std::mt19937_64 rng(1);
  const ParameterBlock p = testing_support::jitter(s.truth, rng, 0.02);
  const LossEngine engine(s.problem);
  LossWeights w{0.7, 0.2, 3.0, 1.5};
  const LossReport r = engine.total_loss(p, w);
  double sum = 0.0;
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(r.l3d[j], engine.loss_3d(p, j, w), 1e-12 * (1.0 + r.l3d[j]));
    EXPECT_NEAR(r.l2d[j], engine.loss_2d(p, j, w), 1e-12 * (1.0 + r.l2d[j]));
    EXPECT_NEAR(r.lcal[j], engine.loss_cal(p, j, w), 1e-12 * (1.0 + r.lcal[j]));
    sum += 0.7 * r.l3d[j] + 0.2 * r.l2d[j] + 3.0 * r.lcal[j];
  }
  for (const auto& [pair, v] : r.lcross) {
    EXPECT_NEAR(v, engine.loss_cross(p, pair.first, pair.second, w), 1e-12 * (1.0 + v));
    sum += 1.5 * v;
  }
  EXPECT_NEAR(r.total, sum, 1e-9);
}

TEST(Loss, HandEyeTermsInvariantUnderCommonLeftMultiplication) {
  const Fixture s = make_setup(true, 7);
  std::mt19937_64 rng(2);
  ParameterBlock p = testing_support::jitter(s.truth, rng, 0.02);
  const LossEngine engine(s.problem);
  const double cal = engine.loss_cal(p, 1);
  const double cross = engine.loss_cross(p, 0, 1);
  Tangent6 d;
  d << 0.3, -0.2, 0.5, 1.0, -2.0, 0.5;
  const RigidTransform g = exp_map(d);
  for (int v : engine.camera_views(1)) p.poses[v] = g * p.poses[v];
  EXPECT_NEAR(engine.loss_cal(p, 1), cal, 1e-9);
  EXPECT_NEAR(engine.loss_cross(p, 0, 1), cross, 1e-9);
}

TEST(Loss, SingleCameraIgnoresCrossSwitch) {
  const Fixture s = make_setup(false, 8, 0.01);
  std::mt19937_64 rng(3);
  const ParameterBlock p = testing_support::jitter(s.truth, rng, 0.01);
  const LossEngine engine(s.problem);
  LossWeights on;
  LossWeights off;
  off.cross_enabled = false;
  Gradient g_on;
  Gradient g_off;
  EXPECT_EQ(engine.gradient(p, on, g_on).total, engine.gradient(p, off, g_off).total);
  EXPECT_EQ(g_on.flatten(), g_off.flatten());
}

TEST(Loss, EdgeOwnerIsCameraOfLowerView) {
  const Fixture s = make_setup(true, 9);
  const LossEngine engine(s.problem);
  for (size_t e = 0; e < s.problem.graph.edges.size(); ++e) {
    const auto& edge = s.problem.graph.edges[e];
    EXPECT_EQ(engine.edge_owner(e), s.problem.views[std::min(edge.view_n, edge.view_m)].camera);
  }
}

TEST(Loss, RejectsMatchOnInvalidPixel) {
  Fixture s = make_setup(false, 10);
  auto& pm = s.problem.views[s.problem.graph.edges[0].view_n].canonical;
  const auto cell = pm.cell_of(s.problem.graph.edges[0].pairs[0].pixel_n);
  ASSERT_TRUE(cell);
  pm.confidence[*cell] = 0.0;
  try {
    LossEngine engine(s.problem);
    FAIL() << "expected InvalidMatchedPixel";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidMatchedPixel);
  }
}

TEST(Loss, CalNeedsTwoPoses) {
  Fixture s = make_setup(false, 11);
  s.problem.views.resize(1);
  s.problem.graph.edges.clear();
  const LossEngine engine(s.problem);
  ParameterBlock p = s.truth;
  p.poses.resize(1);
  p.log_sigma.resize(1);
  try {
    (void)engine.loss_cal(p, 0);
    FAIL() << "expected InsufficientPoses";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientPoses);
  }
}

TEST(Loss, CrossNeedsCommonPoses) {
  Fixture s = make_setup(true, 12);
  // Camera 1 keeps pose 0 and moves its other views to poses camera 0 never visits.
  const int n = static_cast<int>(s.problem.trajectory.size());
  for (int k = 0; k < n; ++k) s.problem.trajectory.poses.push_back(s.problem.trajectory.poses[k]);
  for (auto& v : s.problem.views) {
    if (v.camera == 1 && v.pose_index > 0) v.pose_index += n;
  }
  const LossEngine engine(s.problem);
  const auto pairs = engine.cross_pairs();
  EXPECT_EQ(std::count(pairs.begin(), pairs.end(), std::make_pair(0, 1)), 0);
  try {
    (void)engine.loss_cross(s.truth, 0, 1);
    FAIL() << "expected PoseIndexMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PoseIndexMismatch);
  }
}

TEST(Loss, LinearizedGradientMatchesAnalyticGradient) {
  for (bool robust : {false, true}) {
    const Fixture s = make_setup(true, 12, 0.01);
    std::mt19937_64 rng(4);
    const ParameterBlock p = testing_support::jitter(s.truth, rng, 0.01);
    const LossEngine engine(s.problem);
    LossWeights w;
    w.robust = robust;
    w.w2d = 0.2;
    w.w_rot = 2.0;
    Gradient g;
    const LossReport r = engine.gradient(p, w, g);
    const NormalEquations ne = engine.linearize(p, w);
    EXPECT_NEAR(ne.loss, r.total, 1e-9 * r.total);
    const Eigen::VectorXd ref = g.flatten();
    EXPECT_LE((ne.gradient - ref).norm(), 1e-9 * ref.norm()) << "robust=" << robust;
    EXPECT_LE((ne.hessian - ne.hessian.transpose()).norm(), 1e-9 * ne.hessian.norm());
  }
}

TEST(Loss, FocalPerturbationRaisesReprojectionLoss) {
  const Fixture s = make_setup(false, 13);
  const LossEngine engine(s.problem);
  EXPECT_LE(engine.loss_2d(s.truth, 0), 1e-6);
  ParameterBlock p = s.truth;
  p.intrinsics[0].fx *= 1.01;
  EXPECT_GT(engine.loss_2d(p, 0), 1e-3);
}

TEST(Loss, NoiselessTruthIsStationary) {
  const Fixture s = make_setup(true, 14);
  const LossEngine engine(s.problem);
  // Smooth terms: Huber scene residuals are quadratic near zero, so the
  // gradient vanishes there.
  LossWeights smooth;
  smooth.robust = true;
  smooth.wcal = 0.0;
  smooth.wcross = 0.0;
  Gradient g;
  engine.gradient(s.truth, smooth, g);
  EXPECT_LE(g.norm(), 1e-6);
  // The unsquared hand-eye norms have a kink at zero residual; there the
  // truth is a minimum along every direction rather than a zero of the gradient.
  const double base = engine.total_loss(s.truth).total;
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const ParameterBlock p = testing_support::jitter(s.truth, rng, 1e-4);
    EXPECT_GT(engine.total_loss(p).total, base);
  }
}

TEST(Loss, PureRotationMotionLeavesLambdaGradientZero) {
  Fixture s = make_setup(false, 15);
  // Pure rotations about the camera center: X R_i X^-1 has no translation.
  const RigidTransform x = s.scenario.truth.extrinsics[0];
  for (size_t i = 0; i < s.problem.trajectory.size(); ++i) {
    const Rotation r = Rotation::about_z(0.2 * static_cast<double>(i)) * Rotation::about_x(0.1 * static_cast<double>(i));
    s.problem.trajectory.poses[i] = x * RigidTransform{r, Vec3::Zero()} * x.inverse();
  }
  s.problem.trajectory.poses[0] = RigidTransform::identity();
  ParameterBlock p = s.truth;
  for (const auto& v : s.problem.views) {
    const RigidTransform b = x.inverse() * s.problem.trajectory.poses[v.pose_index] * x;
    p.poses[v.id] = RigidTransform{b.rotation, Vec3::Zero()};
  }
  const LossEngine engine(s.problem);
  LossWeights only_cal;
  only_cal.w3d = 0.0;
  only_cal.w2d = 0.0;
  only_cal.wcross = 0.0;
  // Move away from the solution so the term itself is not stationary.
  p.extrinsics[0].translation += Vec3(0.01, -0.02, 0.005);
  Gradient g;
  engine.gradient(p, only_cal, g);
  EXPECT_GT(g.norm(), 1e-6);
  EXPECT_EQ(g.log_lambda[0], 0.0);
}

TEST(Loss, ThreadCountDoesNotChangeAnyResult) {
  const Fixture s = make_setup(true, 16, 0.01);
  std::mt19937_64 rng(5);
  const ParameterBlock p = testing_support::jitter(s.truth, rng, 0.01);
  LossWeights w;
  w.robust = true;
  const LossEngine serial(s.problem);
  Gradient g1;
  const LossReport r1 = serial.gradient(p, w, g1);
  const NormalEquations n1 = serial.linearize(p, w);
  for (int threads : {2, 3, 8}) {
    const LossEngine parallel(s.problem, threads);
    Gradient g;
    const LossReport r = parallel.gradient(p, w, g);
    EXPECT_EQ(r.total, r1.total);
    EXPECT_EQ(r.l3d, r1.l3d);
    EXPECT_EQ(g.flatten(), g1.flatten());
    const NormalEquations n = parallel.linearize(p, w);
    EXPECT_EQ(n.gradient, n1.gradient);
    EXPECT_EQ(n.hessian, n1.hessian);
    EXPECT_EQ(parallel.total_loss(p, w).total, serial.total_loss(p, w).total);
  }
  EXPECT_THROW(LossEngine(s.problem, 0), Error);
}
