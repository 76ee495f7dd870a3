#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "rigrecon/archive.hpp"
#include "rigrecon/loss.hpp"

namespace rigrecon {

enum class MotionMode { Arm, Mobile };

struct ScenarioConfig {
  MotionMode mode{MotionMode::Arm};
  int cameras{1};
  int poses{25};
  int scene_points{1500};
  std::optional<CheckerboardSpec> board;
  double depth_noise{0.0};       // relative stddev of the depth along the ray
  double outlier_fraction{0.0};  // share of matches re-paired to a random pixel
  double pose_jitter{0.0};       // stddev of the reported robot poses (rad, m)
  /// Per-camera metric scale; pointmaps are rendered at 1/lambda. A single
  /// entry applies to every camera.
  std::vector<double> lambda{2.5};
  int width{96};
  int height{72};
  double focal{84.0};
  int estimates_per_view{1};
  int max_matches{120};
  int min_shared{8};
  bool ground_masks{false};
  bool intrinsics_prior{false};
  std::uint64_t seed{1};

  [[nodiscard]] double lambda_of(int camera) const;
  /// Throws InvalidConfig.
  void validate() const;
};

struct GroundTruth {
  std::vector<RigidTransform> extrinsics;  // X_j*
  std::vector<double> lambda;              // lambda_j*
  std::vector<Intrinsics> intrinsics;
  std::vector<RigidTransform> view_poses;  // T^{R_0}_{C}, metric, per view
  std::vector<Vec3> scene_points;          // R_0 frame
  RobotTrajectory trajectory;              // noise-free
  /// Floor plane in the R_0 frame (n . p = d); unit z and 0 for both modes.
  Vec3 floor_normal{Vec3::UnitZ()};
  double floor_offset{0.0};
};

struct Scenario {
  ScenarioConfig config;
  Archive archive;
  RobotTrajectory trajectory;  // as reported to the solver
  GroundTruth truth;
};

/// Renders a scene with a point z-buffer per pixel cell, so every valid
/// pixel holds exactly one scene point. Deterministic for a given config.
Scenario generate(const ScenarioConfig& config);

/// "franka-like" or "memroc-like". Throws UnknownPreset.
ScenarioConfig preset(std::string_view name);

/// Engine parameters at the truth: world frame = R_0 at reconstruction scale
/// (the lambda of each view's camera), sigma = 1.
ParameterBlock ground_truth_parameters(const Scenario& scenario);

/// Keeps the first `poses` robot poses: drops later views, their matches and
/// scores, and renumbers the remaining views.
Scenario truncate_poses(const Scenario& scenario, int poses);

}  // namespace rigrecon
