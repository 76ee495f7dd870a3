#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rigrecon/archive.hpp"
#include "rigrecon/ground_plane.hpp"
#include "rigrecon/handeye.hpp"
#include "rigrecon/loss.hpp"

namespace rigrecon {

struct OptimizerConfig {
  int max_iterations{2000};
  double step{1e-2};
  /// Per-group multipliers of `step`. Intrinsics steps are relative to the
  /// initial focal length.
  double pose_step{1.0};
  double scale_step{1.0};
  double intrinsics_step{0.1};
  double extrinsics_step{1.0};
  /// Stop when the best loss improves by less than this fraction over `window` iterations.
  double tolerance{1e-7};
  int window{20};
  /// Share of iterations with the reprojection weight at 0, followed by a
  /// linear ramp of `ramp_fraction` back to the full weight.
  double warmup_fraction{0.3};
  double ramp_fraction{0.2};
  bool freeze_intrinsics{false};
  /// Damped Gauss-Newton polish after the descent; 0 disables it.
  int refine_iterations{50};
  double refine_tolerance{1e-12};

  void validate() const;
};

/// Which coordinates the descent must not move.
struct FrozenSet {
  std::vector<char> pose;   // per view, pose and sigma
  /// Per camera: axis along which the translation of X_j is held fixed
  /// (unobservable for planar motion). Empty when free.
  std::vector<std::optional<Vec3>> extrinsic_axis;
  bool intrinsics{false};
};

struct ConvergenceLog {
  std::vector<double> loss;  // full-weight total per iteration
  std::vector<double> best;  // best-so-far
  double initial_loss{0.0};
  double final_loss{0.0};
  int iterations{0};
  int refine_iterations{0};
  bool converged{false};
  std::string stop_reason;
};

struct CameraInit {
  bool handeye_fallback{false};  // identity X after a degenerate closed form
  bool lambda_fallback{false};   // lambda could not be estimated, set to 1
  ObservabilityReport observability;
};

struct Initialization {
  ParameterBlock params;
  FrozenSet frozen;
  std::vector<CameraInit> cameras;
  std::vector<int> component;  // per view
  std::vector<int> anchors;    // anchor view per component
  std::vector<std::string> warnings;
};

struct InitOptions {
  int ransac_iterations{200};
  double ransac_threshold{0.02};  // relative to the median depth of the pair
  double observability_threshold{1e-6};
  std::uint64_t seed{11};
};

/// Intrinsics (archive prior or focal least squares), per-view poses and depth
/// scales from chained similarity registration, then X_j and lambda_j from the
/// closed-form scaled hand-eye solvers. Throws InsufficientPoses.
Initialization initialize(const CalibrationProblem& problem, const InitOptions& options = {});

/// Adaptive per-coordinate first-order descent in the tangent space. Returns
/// the best parameters seen; `log` receives the loss trace.
ParameterBlock minimize(const LossEngine& engine, const ParameterBlock& start, const FrozenSet& frozen,
                        const LossWeights& weights, const OptimizerConfig& config, ConvergenceLog& log);

/// Levenberg-Marquardt on the iteratively reweighted loss (see
/// LossEngine::linearize) with the same frozen coordinates. Only steps that
/// lower the full-weight loss are taken; appends to `log`.
ParameterBlock refine(const LossEngine& engine, const ParameterBlock& start, const FrozenSet& frozen,
                      const LossWeights& weights, const OptimizerConfig& config, ConvergenceLog& log);

struct SolveConfig {
  OptimizerConfig optimizer;
  LossWeights weights;
  GraphOptions graph;
  InitOptions init;
  PlaneFitOptions ground;
  /// Consensus required when no ground masks are available (all points used).
  double unmasked_consensus{0.6};
  int threads{1};
};

struct CameraResult {
  RigidTransform extrinsics;  // X_j = T^R_{C_j}
  double lambda{1.0};
  Intrinsics intrinsics;
  bool z_unobservable{false};
  Vec3 unobservable_axis{Vec3::UnitZ()};
  double min_singular_value{0.0};
  std::optional<HeightEstimate> recovered_z;
  bool handeye_fallback{false};
  bool lambda_fallback{false};
  /// Mean hand-eye residual per motion at the solution.
  double mean_cal_residual{0.0};
};

struct ViewResult {
  int id{0};
  int camera{0};
  int pose_index{0};
  RigidTransform pose;  // T^{R_0}_{C}, metric
  double sigma{1.0};    // solved depth scale of the view
};

struct CalibrationResult {
  std::vector<CameraResult> cameras;
  std::vector<ViewResult> views;
  std::vector<Vec3> cloud;       // R_0 frame, metric
  std::vector<int> cloud_view;   // source view of each cloud point
  RobotTrajectory trajectory;
  ConvergenceLog log;
  ParameterBlock parameters;     // optimizer variables at the solution
  std::vector<std::string> warnings;
};

/// Full pipeline: problem assembly, initialization, descent, ground-plane
/// recovery of unobservable translations, and metric assembly in R_0.
CalibrationResult solve(const Archive& archive, const RobotTrajectory& trajectory, const SolveConfig& config = {});

/// Appends every valid cell of `canonical`, backprojected through its pixel
/// center at depth * scale and mapped by `pose`.
void append_view_cloud(const Pointmap& canonical, int view_id, const RigidTransform& pose, double scale,
                       const Intrinsics& k, std::vector<Vec3>& cloud, std::vector<int>& cloud_view);

/// Result assembly from optimized parameters (also used by solve).
CalibrationResult assemble_result(const CalibrationProblem& problem, const Initialization& init,
                                  const ParameterBlock& params);

}  // namespace rigrecon
