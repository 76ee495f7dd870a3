#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "rigrecon/archive.hpp"
#include "rigrecon/optimizer.hpp"

namespace rigrecon {

struct CalibErrors {
  double translation{0.0};  // mean |t - t_hat|, meters
  double rotation{0.0};     // mean angle(R^T R_hat), radians
};

/// Mean translation and rotation error over cameras. Throws LengthMismatch.
CalibErrors calib_errors(std::span<const RigidTransform> estimated, std::span<const RigidTransform> truth);

struct ScaleAccuracy {
  double mean_square{0.0};     // m_s: mean of the per-detection mean adjacent-corner distances
  double stddev{0.0};          // sigma_s over all adjacent-corner distances
  double relative_error{0.0};  // delta_s, percent
  size_t detections{0};
  size_t distances{0};
};

/// Each detection holds rows*cols corners in row-major board order.
/// Throws NoDetections when the list is empty, DimensionMismatch on a
/// detection of the wrong size.
ScaleAccuracy scale_accuracy(const std::vector<std::vector<Vec3>>& detections, const CheckerboardSpec& board);

/// Lifts every complete corner detection of the archive into the metric R_0
/// frame of `result`. Each corner takes the depth of the pointmap cell that
/// contains it and is backprojected at its exact sub-pixel location with the
/// solved sigma, intrinsics and lambda. Detections touching an invalid cell
/// are skipped.
std::vector<std::vector<Vec3>> lift_corners(const Archive& archive, const CalibrationResult& result);

/// Recomputes result.cloud from the archive pointmaps and the solved views
/// (the result file does not store the cloud). Throws DimensionMismatch.
void rebuild_cloud(const Archive& archive, CalibrationResult& result);

/// Writes the result cloud with camera and robot frames embedded (PLY, see
/// io.hpp). Throws EmptyCloud.
void export_cloud(const CalibrationResult& result, const std::filesystem::path& path);

}  // namespace rigrecon
