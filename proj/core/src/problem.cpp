#include "rigrecon/problem.hpp"

#include <set>
#include <string>

#include "rigrecon/error.hpp"

namespace rigrecon {

CalibrationProblem make_problem(const Archive& archive, const RobotTrajectory& trajectory,
                                const GraphOptions& options) {
  archive.validate();
  trajectory.validate();
  CalibrationProblem p;
  p.camera_count = archive.camera_count();
  std::vector<std::set<int>> poses(p.camera_count);
  for (const auto& v : archive.views) {
    if (v.pose_index >= static_cast<int>(trajectory.size())) {
      throw Error(ErrorCode::PoseIndexMismatch, "view " + std::to_string(v.id) + " references pose " +
                                                    std::to_string(v.pose_index) + " but the trajectory has " +
                                                    std::to_string(trajectory.size()) + " poses");
    }
    poses[v.camera].insert(v.pose_index);
  }
  for (int j = 0; j < p.camera_count; ++j) {
    if (poses[j].size() < 2) {
      throw Error(ErrorCode::InsufficientPoses,
                  "camera " + std::to_string(j) + " has fewer than two robot poses");
    }
  }
  p.views = archive.view_records();
  p.trajectory = trajectory;
  const auto edges = build_graph(archive.scores, options);
  p.graph = assemble_graph(static_cast<int>(p.views.size()), edges, archive.matches);
  p.graph.validate();
  return p;
}

}  // namespace rigrecon
