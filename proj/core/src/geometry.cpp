#include "rigrecon/geometry.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include "rigrecon/error.hpp"

namespace rigrecon {

namespace {

constexpr double kSmallAngle = 1e-5;
constexpr double kNearPiMargin = 1e-6;
constexpr double kMinDepth = 1e-9;

}  // namespace

Mat3 hat(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(),  //
      a.z(), 0.0, -a.x(),   //
      -a.y(), a.x(), 0.0;
  return m;
}

Rotation::Rotation(const Eigen::Quaterniond& q) : r_(q.normalized().toRotationMatrix()) {}

Rotation Rotation::from_matrix(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return Rotation(Mat3(svd.matrixU() * d * svd.matrixV().transpose()));
}

Rotation Rotation::from_axis_angle(const Vec3& axis_angle) {
  const double theta = axis_angle.norm();
  if (theta < kSmallAngle) {
    // second-order expansion of (cos(theta/2), sin(theta/2)/theta * w)
    const double half_sq = 0.25 * theta * theta;
    const double w = 1.0 - 0.5 * half_sq;
    const double s = 0.5 * (1.0 - half_sq / 6.0);
    return Rotation(Eigen::Quaterniond(w, s * axis_angle.x(), s * axis_angle.y(), s * axis_angle.z()));
  }
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(theta, axis_angle / theta)));
}

Vec3 Rotation::log() const {
  Eigen::Quaterniond q = quaternion();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const double vnorm = q.vec().norm();
  if (vnorm < 1e-12) {
    return 2.0 * q.vec() / q.w();
  }
  const double theta = 2.0 * std::atan2(vnorm, q.w());
  return q.vec() * (theta / vnorm);
}

double Rotation::angle() const {
  const Eigen::Quaterniond q = quaternion();
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

double rotation_angle(const Rotation& r1, const Rotation& r2) {
  return (r1.inverse() * r2).angle();
}

RigidTransform RigidTransform::from_matrix(const Mat4& m) {
  return from_rt(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
}

Mat4 RigidTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

RigidTransform RigidTransform::inverse() const {
  const Rotation r_inv = rotation.inverse();
  return {r_inv, -(r_inv * translation)};
}

RigidTransform scaled_motion(const RigidTransform& t, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::NonPositiveScale, "scaled_motion requires lambda > 0");
  return {t.rotation, lambda * t.translation};
}

Mat3 so3_left_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = hat(omega);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + 0.5 * w + (1.0 / 6.0) * w * w;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() + ((1.0 - std::cos(theta)) / t2) * w +
         ((theta - std::sin(theta)) / (t2 * theta)) * w * w;
}

RigidTransform exp_map(const Tangent6& x) {
  const Vec3 omega = x.head<3>();
  const Vec3 v = x.tail<3>();
  return {Rotation::from_axis_angle(omega), so3_left_jacobian(omega) * v};
}

Tangent6 log_map(const RigidTransform& t) {
  const double theta = t.rotation.angle();
  if (theta >= std::numbers::pi - kNearPiMargin) {
    throw Error(ErrorCode::NearPiRotation, "log_map undefined near a half-turn rotation");
  }
  const Vec3 omega = t.rotation.log();
  const Mat3 w = hat(omega);
  Mat3 v_inv;
  if (theta < kSmallAngle) {
    v_inv = Mat3::Identity() - 0.5 * w + (1.0 / 12.0) * w * w;
  } else {
    const double coeff =
        (1.0 - (theta * std::sin(theta)) / (2.0 * (1.0 - std::cos(theta)))) / (theta * theta);
    v_inv = Mat3::Identity() - 0.5 * w + coeff * w * w;
  }
  Tangent6 out;
  out.head<3>() = omega;
  out.tail<3>() = v_inv * t.translation;
  return out;
}

void Intrinsics::validate() const {
  const bool ok = fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 && cx < width &&
                  cy >= 0.0 && cy < height && std::isfinite(fx) && std::isfinite(fy);
  if (!ok) throw Error(ErrorCode::InvalidIntrinsics, "intrinsics violate fx,fy>0, 0<=c<size");
}

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Vec2 project(const Vec3& point, const Intrinsics& k) {
  if (point.z() <= kMinDepth) throw Error(ErrorCode::NonPositiveDepth, "point behind the camera");
  return {k.fx * point.x() / point.z() + k.cx, k.fy * point.y() / point.z() + k.cy};
}

Vec3 backproject(const Vec2& pixel, double depth, double sigma, const Intrinsics& k,
                 const RigidTransform& pose) {
  if (!(depth > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "backproject requires depth > 0");
  if (!(sigma > 0.0)) throw Error(ErrorCode::NonPositiveScale, "backproject requires sigma > 0");
  const double z = sigma * depth;
  const Vec3 pc((pixel.x() - k.cx) / k.fx * z, (pixel.y() - k.cy) / k.fy * z, z);
  return pose * pc;
}

double weighted_frobenius(const RigidTransform& a, const RigidTransform& b, double w_rot,
                          double w_trans) {
  const Mat3 dr = a.rotation.matrix() - b.rotation.matrix();
  const Vec3 dt = a.translation - b.translation;
  return std::sqrt(w_rot * dr.squaredNorm() + w_trans * dt.squaredNorm());
}

}  // namespace rigrecon
