#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rigrecon/archive.hpp"
#include "rigrecon/loss.hpp"
#include "rigrecon/optimizer.hpp"

namespace rigrecon {

// Archive directory layout
// ------------------------
// manifest.txt (text, one record per line):
//   rigrecon-archive 1
//   byte-order little-endian
//   board <rows> <cols> <square>                      optional
//   view <id> camera <j> pose <i> width <w> height <h> estimates <k> [mask] [corners]
//   intrinsics <id> <fx> <fy> <cx> <cy>               optional, per view
//   pair <view_n> <view_m> <count>                    one per match set, in file order
// Binary channels, little-endian float32, row-major:
//   view<id>_points<e>.bin      h*w*3 floats (x, y, z per pixel)
//   view<id>_confidence<e>.bin  h*w floats, 0 marks an invalid pixel
//   view<id>_mask.bin           h*w bytes, 0 or 1
//   view<id>_corners.bin        rows*cols*2 floats (x, y per corner)
//   matches.bin                 per match: x_n, y_n, x_m, y_m, q; sets in manifest order
//   scores.bin                  V*V floats
// Values are stored as float32, so write->read is the identity for any
// archive whose values are float32-representable (in particular for every
// archive that was itself read from disk).

void write_archive(const std::filesystem::path& dir, const Archive& archive);
/// Throws MissingChannel, DimensionMismatch, CorruptBinary or MalformedLine.
Archive read_archive(const std::filesystem::path& dir);

// Trajectory text: one pose per line, "<index> r00 r01 r02 t0 r10 r11 r12 t1
// r20 r21 r22 t2" (row-major 3x4 of T^{R_0}_{R_i}); indices 0..N-1 in order.
// Blank lines and lines starting with '#' are ignored.

/// Rotations off by at most 1e-3 (Frobenius norm of R^T R - I) are projected
/// onto SO(3); a first pose within 1e-6 of the identity is snapped to it with a
/// warning. Throws MalformedLine, NonRigidRotation, FirstPoseNotIdentity.
RobotTrajectory read_trajectory(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);
void write_trajectory(const std::filesystem::path& path, const RobotTrajectory& trajectory);

/// Point cloud with embedded frames: binary little-endian PLY with float x, y,
/// z and int view per vertex; frames in comment lines
/// "comment frame camera|robot <k> <12 numbers>".
struct PointCloudFile {
  std::vector<Vec3> points;
  std::vector<int> source_view;
  std::vector<RigidTransform> camera_frames;
  std::vector<RigidTransform> robot_frames;
};

void write_cloud(const std::filesystem::path& path, const PointCloudFile& cloud);
/// Throws CorruptBinary or MalformedLine.
PointCloudFile read_cloud(const std::filesystem::path& path);

/// Key-value calibration summary: one block per camera (X_j as 12 numbers,
/// lambda, intrinsics, flags), per-view poses and depth scales, convergence
/// and warnings. The cloud is not part of this file.
void write_result(const std::filesystem::path& path, const CalibrationResult& result);
/// Restores everything write_result stored. Throws MalformedLine.
CalibrationResult read_result(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double.
std::string format_number(double value);

}  // namespace rigrecon
