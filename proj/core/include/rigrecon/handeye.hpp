#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rigrecon/geometry.hpp"

namespace rigrecon {

/// Relative robot motion `a` and the matching relative camera motion `b`
/// (AX = XB).
struct MotionPair {
  RigidTransform a;
  RigidTransform b;
};

using MotionPairSet = std::vector<MotionPair>;

struct ObservabilityReport {
  /// Singular values of the stacked (R_A - I), descending.
  Vec3 singular_values{Vec3::Zero()};
  /// Right singular vector of the smallest singular value (robot frame).
  Vec3 null_axis{Vec3::UnitZ()};
  /// Smallest singular value <= threshold: the translation of X along
  /// `null_axis` is not constrained by the motions.
  bool axis_unobservable{false};
};

ObservabilityReport analyze_observability(std::span<const RigidTransform> robot_motions,
                                          double threshold = 1e-6);

/// Closed-form AX = XB: rotation from the null space of the stacked Kronecker
/// system, projected to SO(3); translation by linear least squares.
/// Throws DegenerateMotion when the robot rotation axes span fewer than two
/// directions.
RigidTransform solve_rotation_translation(const MotionPairSet& pairs);

struct ScaledSolution {
  RigidTransform x;
  double lambda{1.0};
};

/// As solve_rotation_translation, with an unknown positive scale on the
/// camera translations: (R_A - I) t_X - lambda R_X t_B = -t_A.
/// Throws DegenerateMotion or ZeroCameraTranslation.
ScaledSolution solve_with_scale(const MotionPairSet& pairs);

struct PlanarSolution {
  RigidTransform x;  // translation has no component along `axis`
  double lambda{1.0};
  Vec3 axis{Vec3::UnitZ()};
};

/// Scaled hand-eye for motions whose rotations share the single axis `axis`
/// (planar mobile robots). Recovers the full rotation (tilt from the axis
/// correspondence, heading from the translations), the in-plane translation
/// and the scale. Throws DegenerateMotion / ZeroCameraTranslation.
PlanarSolution solve_planar_with_scale(const MotionPairSet& pairs, const Vec3& axis);

/// max_i |A_i - X B_i(lambda) X^-1|_F.
double max_conjugation_residual(const MotionPairSet& pairs, const RigidTransform& x, double lambda);

/// sum_i |A_i X - X B_i(lambda)|_F.
double handeye_residual(const MotionPairSet& pairs, const RigidTransform& x, double lambda);

}  // namespace rigrecon
