#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rigrecon/geometry.hpp"

namespace rigrecon {

/// Dense grid of 3D points with per-pixel confidence. Pixel (x, y) has its
/// center at image coordinates (x, y) and is stored at index y * width + x.
/// A confidence of 0 marks the pixel as invalid; its point must not be read.
struct Pointmap {
  int width{0};
  int height{0};
  std::vector<Vec3> points;
  std::vector<double> confidence;

  Pointmap() = default;
  Pointmap(int w, int h)
      : width(w), height(h), points(static_cast<size_t>(w) * h, Vec3::Zero()),
        confidence(static_cast<size_t>(w) * h, 0.0) {}

  [[nodiscard]] size_t size() const { return points.size(); }
  [[nodiscard]] size_t index(int x, int y) const { return static_cast<size_t>(y) * width + x; }
  [[nodiscard]] bool valid(size_t i) const { return confidence[i] > 0.0; }
  [[nodiscard]] size_t valid_count() const;
  [[nodiscard]] Vec2 pixel_of(size_t i) const {
    return {static_cast<double>(i % width), static_cast<double>(i / width)};
  }
  /// Index of the pixel whose cell contains `pixel`, if inside the image.
  [[nodiscard]] std::optional<size_t> cell_of(const Vec2& pixel) const;

  /// Throws DimensionMismatch / InvalidArgument when the grid invariants fail.
  void validate() const;
};

/// Per-pixel depth (z channel). `valid[i] == 0` marks an invalid pixel.
struct DepthMap {
  int width{0};
  int height{0};
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;
};

struct Match {
  Vec2 pixel_n;
  Vec2 pixel_m;
  double weight{1.0};
};

/// Correspondences between views `view_n` and `view_m`.
struct MatchSet {
  int view_n{0};
  int view_m{0};
  std::vector<Match> pairs;
};

/// One image of the capture: which camera took it at which robot pose, and
/// its fused pointmap.
struct ViewRecord {
  int id{0};
  int camera{0};
  int pose_index{0};
  Pointmap canonical;
  std::optional<Intrinsics> intrinsics_prior;
  /// Floor pixels, one byte per pixel (0/1).
  std::optional<std::vector<std::uint8_t>> ground_mask;
  /// Detected checkerboard corners in row-major board order.
  std::optional<std::vector<Vec2>> corners;
};

/// Confidence-weighted average of several estimates of the same view. Output
/// confidence is the per-pixel sum of input confidences.
Pointmap canonical_pointmap(std::span<const Pointmap> estimates);

DepthMap depth_of(const Pointmap& canonical);
inline DepthMap depth_of(const ViewRecord& view) { return depth_of(view.canonical); }

/// Depth of the cell containing `pixel`, if that cell is valid.
std::optional<double> depth_at(const Pointmap& canonical, const Vec2& pixel);

/// Every valid pixel backprojected with its canonical depth, the depth scale
/// `sigma`, intrinsics `k` and camera-to-world `pose`.
Pointmap constrained_pointmap(const ViewRecord& view, double sigma, const Intrinsics& k,
                              const RigidTransform& pose);

/// Constrained point at an arbitrary (sub-pixel) location, using the depth of
/// the containing cell. Empty when that cell is invalid or outside the image.
std::optional<Vec3> constrained_point(const Pointmap& canonical, const Vec2& pixel, double sigma,
                                      const Intrinsics& k, const RigidTransform& pose);

}  // namespace rigrecon
