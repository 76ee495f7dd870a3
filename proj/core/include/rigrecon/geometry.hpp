#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rigrecon {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Tangent vector of a rigid transform: (omega, v), rotation part first.
using Tangent6 = Vec6;

/// Skew-symmetric matrix such that hat(a) * b == a.cross(b).
Mat3 hat(const Vec3& a);

/// 3D rotation stored as an orthonormal matrix, so values read from files
/// survive a write/read cycle unchanged.
class Rotation {
 public:
  Rotation() = default;
  /// Normalizes `q`.
  explicit Rotation(const Eigen::Quaterniond& q);

  static Rotation identity() { return {}; }
  /// Projects `m` onto the nearest rotation (SVD) before conversion.
  static Rotation from_matrix(const Mat3& m);
  /// Takes `m` verbatim; the caller guarantees it is a rotation.
  static Rotation from_orthonormal(const Mat3& m) { return Rotation(m); }
  static Rotation from_axis_angle(const Vec3& axis_angle);
  static Rotation about_x(double angle) { return from_axis_angle(Vec3::UnitX() * angle); }
  static Rotation about_y(double angle) { return from_axis_angle(Vec3::UnitY() * angle); }
  static Rotation about_z(double angle) { return from_axis_angle(Vec3::UnitZ() * angle); }

  [[nodiscard]] Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(r_); }
  [[nodiscard]] const Mat3& matrix() const { return r_; }
  /// Axis-angle vector with angle in [0, pi].
  [[nodiscard]] Vec3 log() const;
  [[nodiscard]] double angle() const;
  [[nodiscard]] Rotation inverse() const { return Rotation(Mat3(r_.transpose())); }

  Rotation operator*(const Rotation& other) const { return Rotation(Mat3(r_ * other.r_)); }
  Vec3 operator*(const Vec3& p) const { return r_ * p; }

 private:
  explicit Rotation(const Mat3& m) : r_(m) {}

  Mat3 r_{Mat3::Identity()};
};

/// Angle of r1^T * r2, in [0, pi]. Symmetric in its arguments.
double rotation_angle(const Rotation& r1, const Rotation& r2);

/// Element of SE(3). Maps points from its source frame into its target frame:
/// T^A_B * p_B = p_A.
struct RigidTransform {
  Rotation rotation;
  Vec3 translation{Vec3::Zero()};

  static RigidTransform identity() { return {}; }
  static RigidTransform from_matrix(const Mat4& m);
  static RigidTransform from_rt(const Mat3& r, const Vec3& t) {
    return {Rotation::from_matrix(r), t};
  }

  [[nodiscard]] Mat4 matrix() const;
  [[nodiscard]] RigidTransform inverse() const;

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform operator*(const RigidTransform& b) const {
    return {rotation * b.rotation, rotation * b.translation + translation};
  }
};

/// a * b: applies b first, then a.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) { return a * b; }
inline RigidTransform invert(const RigidTransform& t) { return t.inverse(); }

/// Rotation unchanged, translation multiplied by `lambda` (> 0).
RigidTransform scaled_motion(const RigidTransform& t, double lambda);

/// exp: se(3) -> SE(3) using the closed-form left Jacobian for the translation.
RigidTransform exp_map(const Tangent6& x);
/// Inverse of exp_map. Throws NearPiRotation when the angle is >= pi - 1e-6.
Tangent6 log_map(const RigidTransform& t);

/// Left Jacobian of SO(3) ("V matrix"): translation part of exp_map is V(omega) * v.
Mat3 so3_left_jacobian(const Vec3& omega);

/// Pinhole intrinsics without distortion.
struct Intrinsics {
  double fx{1.0};
  double fy{1.0};
  double cx{0.0};
  double cy{0.0};
  int width{1};
  int height{1};

  /// Throws InvalidIntrinsics when any invariant is violated.
  void validate() const;
  [[nodiscard]] Mat3 matrix() const;
  bool operator==(const Intrinsics&) const = default;
};

/// Pixel coordinates of a camera-frame point. Throws NonPositiveDepth for z <= 1e-9.
Vec2 project(const Vec3& point, const Intrinsics& k);

/// World point of `pixel` at the given depth, depth scale and camera pose
/// (camera-to-world).
Vec3 backproject(const Vec2& pixel, double depth, double sigma, const Intrinsics& k,
                 const RigidTransform& pose);

/// Frobenius norm of the 4x4 difference, with rotation and translation blocks
/// weighted separately: sqrt(w_rot * |dR|^2 + w_trans * |dt|^2).
double weighted_frobenius(const RigidTransform& a, const RigidTransform& b, double w_rot = 1.0,
                          double w_trans = 1.0);

}  // namespace rigrecon
