#include "rigrecon/evaluation.hpp"

#include <cmath>
#include <map>
#include <string>

#include "rigrecon/error.hpp"
#include "rigrecon/io.hpp"

namespace rigrecon {

CalibErrors calib_errors(std::span<const RigidTransform> estimated, std::span<const RigidTransform> truth) {
  if (estimated.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "estimated and true extrinsics differ in count (" +
                                               std::to_string(estimated.size()) + " vs " +
                                               std::to_string(truth.size()) + ")");
  }
  if (estimated.empty()) throw Error(ErrorCode::LengthMismatch, "no cameras to compare");
  CalibErrors e;
  for (size_t j = 0; j < truth.size(); ++j) {
    e.translation += (truth[j].translation - estimated[j].translation).norm();
    e.rotation += rotation_angle(truth[j].rotation, estimated[j].rotation);
  }
  const auto m = static_cast<double>(truth.size());
  e.translation /= m;
  e.rotation /= m;
  return e;
}

ScaleAccuracy scale_accuracy(const std::vector<std::vector<Vec3>>& detections, const CheckerboardSpec& board) {
  board.validate();
  if (detections.empty()) throw Error(ErrorCode::NoDetections, "no checkerboard detections");
  ScaleAccuracy out;
  std::vector<double> pooled;
  double sum_of_means = 0.0;
  for (const auto& corners : detections) {
    if (static_cast<int>(corners.size()) != board.corner_count()) {
      throw Error(ErrorCode::DimensionMismatch, "detection has " + std::to_string(corners.size()) +
                                                    " corners, board has " +
                                                    std::to_string(board.corner_count()));
    }
    double sum = 0.0;
    size_t count = 0;
    auto add = [&](int a, int b) {
      const double d = (corners[a] - corners[b]).norm();
      pooled.push_back(d);
      sum += d;
      ++count;
    };
    for (int r = 0; r < board.rows; ++r) {
      for (int c = 0; c < board.cols; ++c) {
        const int i = r * board.cols + c;
        if (c + 1 < board.cols) add(i, i + 1);
        if (r + 1 < board.rows) add(i, i + board.cols);
      }
    }
    sum_of_means += sum / static_cast<double>(count);
  }
  out.detections = detections.size();
  out.distances = pooled.size();
  out.mean_square = sum_of_means / static_cast<double>(detections.size());
  double mean = 0.0;
  for (double d : pooled) mean += d;
  mean /= static_cast<double>(pooled.size());
  double var = 0.0;
  for (double d : pooled) var += (d - mean) * (d - mean);
  out.stddev = std::sqrt(var / static_cast<double>(pooled.size()));
  out.relative_error = std::abs(out.mean_square - board.square) / board.square * 100.0;
  return out;
}

std::vector<std::vector<Vec3>> lift_corners(const Archive& archive, const CalibrationResult& result) {
  std::map<int, const ViewResult*> by_id;
  for (const auto& v : result.views) by_id[v.id] = &v;
  const std::vector<ViewRecord> records = archive.view_records();
  std::vector<std::vector<Vec3>> out;
  for (const auto& view : records) {
    if (!view.corners) continue;
    const auto it = by_id.find(view.id);
    if (it == by_id.end()) continue;
    const CameraResult& cam = result.cameras.at(view.camera);
    const double sigma = it->second->sigma;
    std::vector<Vec3> lifted;
    lifted.reserve(view.corners->size());
    for (const auto& px : *view.corners) {
      const auto p = constrained_point(view.canonical, px, sigma, cam.intrinsics, RigidTransform::identity());
      if (!p) break;
      lifted.push_back(it->second->pose * (cam.lambda * *p));
    }
    if (lifted.size() == view.corners->size()) out.push_back(std::move(lifted));
  }
  return out;
}

void rebuild_cloud(const Archive& archive, CalibrationResult& result) {
  result.cloud.clear();
  result.cloud_view.clear();
  std::map<int, const ViewResult*> by_id;
  for (const auto& v : result.views) by_id[v.id] = &v;
  for (const auto& view : archive.view_records()) {
    const auto it = by_id.find(view.id);
    if (it == by_id.end()) continue;
    if (view.camera < 0 || view.camera >= static_cast<int>(result.cameras.size())) {
      throw Error(ErrorCode::DimensionMismatch, "view " + std::to_string(view.id) + " uses camera " +
                                                    std::to_string(view.camera) + " which the result lacks");
    }
    const CameraResult& cam = result.cameras[view.camera];
    append_view_cloud(view.canonical, view.id, it->second->pose, it->second->sigma * cam.lambda, cam.intrinsics,
                      result.cloud, result.cloud_view);
  }
}

void export_cloud(const CalibrationResult& result, const std::filesystem::path& path) {
  if (result.cloud.empty()) throw Error(ErrorCode::EmptyCloud, "result has no reconstructed points");
  PointCloudFile file;
  file.points = result.cloud;
  file.source_view = result.cloud_view;
  for (const auto& c : result.cameras) file.camera_frames.push_back(c.extrinsics);
  file.robot_frames = result.trajectory.poses;
  write_cloud(path, file);
}

}  // namespace rigrecon
