#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rigrecon/geometry.hpp"

namespace rigrecon {

/// Plane {p : normal . p = offset} with a unit normal.
struct PlaneModel {
  Vec3 normal{Vec3::UnitZ()};
  double offset{0.0};

  [[nodiscard]] double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
};

struct PlaneFitOptions {
  int iterations{500};
  double inlier_threshold{0.01};  // meters
  double min_consensus{0.3};
  std::uint64_t seed{7};
};

struct PlaneFit {
  PlaneModel plane;
  double inlier_ratio{0.0};
  std::vector<size_t> inliers;
};

/// RANSAC over point triples, then a least-squares refit on the inliers. The
/// normal is oriented so that `viewpoint` lies on its positive side.
/// Throws InsufficientPoints (fewer than 3 points, or all collinear) and
/// NoConsensus (inlier ratio below options.min_consensus).
PlaneFit fit_plane(std::span<const Vec3> points, const PlaneFitOptions& options = {},
                   const Vec3& viewpoint = Vec3::Zero());

/// Point-plane distance of a camera center.
double camera_height(const PlaneModel& plane, const Vec3& center);

struct HeightEstimate {
  double mean{0.0};
  double stddev{0.0};
};

/// Mean (and population standard deviation) of per-view heights. Throws EmptyInput.
HeightEstimate recover_z(std::span<const double> heights);

}  // namespace rigrecon
