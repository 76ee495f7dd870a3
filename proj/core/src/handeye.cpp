#include "rigrecon/handeye.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "rigrecon/error.hpp"

namespace rigrecon {

namespace {

constexpr double kMinAxisSeparation = 1e-3;  // rad
constexpr double kMinRotation = 1e-6;        // rad
constexpr double kMinCameraTranslation = 1e-6;

void require_pairs(const MotionPairSet& pairs) {
  if (pairs.size() < 2) {
    throw Error(ErrorCode::DegenerateMotion, "at least two motion pairs are required");
  }
}

/// Throws DegenerateMotion unless two robot rotation axes are separated by more
/// than kMinAxisSeparation.
void require_axis_diversity(const MotionPairSet& pairs) {
  std::vector<Vec3> axes;
  for (const auto& p : pairs) {
    const Vec3 w = p.a.rotation.log();
    if (w.norm() > kMinRotation) axes.push_back(w.normalized());
  }
  const double min_sin = std::sin(kMinAxisSeparation);
  for (size_t i = 0; i < axes.size(); ++i) {
    for (size_t j = i + 1; j < axes.size(); ++j) {
      if (axes[i].cross(axes[j]).norm() > min_sin) return;
    }
  }
  throw Error(ErrorCode::DegenerateMotion,
              "robot rotation axes span fewer than two directions; the translation along the "
              "common axis is unobservable");
}

Mat3 solve_rotation(const MotionPairSet& pairs) {
  Eigen::MatrixXd k(9 * pairs.size(), 9);
  const Mat3 eye = Mat3::Identity();
  for (size_t i = 0; i < pairs.size(); ++i) {
    const Mat3 ra = pairs[i].a.rotation.matrix();
    const Mat3 rb = pairs[i].b.rotation.matrix();
    // vec(R_A R_X) - vec(R_X R_B) = (I (x) R_A - R_B^T (x) I) vec(R_X), column-major vec
    Eigen::Matrix<double, 9, 9> block;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        block.block<3, 3>(3 * r, 3 * c) = eye(r, c) * ra - rb(c, r) * eye;
      }
    }
    k.block<9, 9>(9 * i, 0) = block;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(k, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> v = svd.matrixV().col(8);
  Mat3 m = Eigen::Map<const Mat3>(v.data());
  if (m.determinant() < 0.0) m = -m;
  return Rotation::from_matrix(m).matrix();
}

Vec3 solve_translation(const MotionPairSet& pairs, const Mat3& rx, double lambda) {
  Eigen::MatrixXd c(3 * pairs.size(), 3);
  Eigen::VectorXd d(3 * pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    c.block<3, 3>(3 * i, 0) = pairs[i].a.rotation.matrix() - Mat3::Identity();
    d.segment<3>(3 * i) = lambda * rx * pairs[i].b.translation - pairs[i].a.translation;
  }
  return c.colPivHouseholderQr().solve(d);
}

}  // namespace

ObservabilityReport analyze_observability(std::span<const RigidTransform> robot_motions,
                                          double threshold) {
  ObservabilityReport report;
  if (robot_motions.empty()) {
    report.axis_unobservable = true;
    return report;
  }
  Eigen::MatrixXd stacked(3 * robot_motions.size(), 3);
  for (size_t i = 0; i < robot_motions.size(); ++i) {
    stacked.block<3, 3>(3 * i, 0) = robot_motions[i].rotation.matrix() - Mat3::Identity();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeFullV);
  report.singular_values = svd.singularValues();
  report.null_axis = svd.matrixV().col(2);
  report.axis_unobservable = report.singular_values(2) <= threshold;
  return report;
}

RigidTransform solve_rotation_translation(const MotionPairSet& pairs) {
  require_pairs(pairs);
  require_axis_diversity(pairs);
  const Mat3 rx = solve_rotation(pairs);
  return {Rotation::from_matrix(rx), solve_translation(pairs, rx, 1.0)};
}

ScaledSolution solve_with_scale(const MotionPairSet& pairs) {
  require_pairs(pairs);
  require_axis_diversity(pairs);
  const bool any_translation = std::any_of(pairs.begin(), pairs.end(), [](const MotionPair& p) {
    return p.b.translation.norm() > kMinCameraTranslation;
  });
  if (!any_translation) {
    throw Error(ErrorCode::ZeroCameraTranslation, "camera motions carry no translation");
  }
  const Mat3 rx = solve_rotation(pairs);

  Eigen::MatrixXd c(3 * pairs.size(), 4);
  Eigen::VectorXd d(3 * pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    c.block<3, 3>(3 * i, 0) = pairs[i].a.rotation.matrix() - Mat3::Identity();
    c.block<3, 1>(3 * i, 3) = -rx * pairs[i].b.translation;
    d.segment<3>(3 * i) = -pairs[i].a.translation;
  }
  const Eigen::Vector4d sol = c.colPivHouseholderQr().solve(d);
  ScaledSolution out;
  out.lambda = sol(3);
  Vec3 t = sol.head<3>();
  if (!(out.lambda > 0.0)) {
    // sign normalization: keep the magnitude, refit the translation
    out.lambda = std::abs(out.lambda);
    if (!(out.lambda > 0.0)) throw Error(ErrorCode::ZeroCameraTranslation, "scale collapsed to zero");
    t = solve_translation(pairs, rx, out.lambda);
  }
  out.x = {Rotation::from_matrix(rx), t};
  return out;
}

PlanarSolution solve_planar_with_scale(const MotionPairSet& pairs, const Vec3& axis) {
  require_pairs(pairs);
  const Vec3 n = axis.normalized();

  // Camera-frame image of the robot axis: log(R_B) = alpha * R_X^T n.
  Vec3 m_acc = Vec3::Zero();
  for (const auto& p : pairs) {
    const double alpha = n.dot(p.a.rotation.log());
    m_acc += alpha * p.b.rotation.log();
  }
  if (m_acc.norm() < kMinRotation) {
    throw Error(ErrorCode::DegenerateMotion, "planar motions contain no rotation");
  }
  const Vec3 m = m_acc.normalized();
  const Mat3 r_align = Eigen::Quaterniond::FromTwoVectors(m, n).toRotationMatrix();

  // In-plane basis.
  Vec3 e1 = n.unitOrthogonal();
  Vec3 e2 = n.cross(e1);
  Eigen::Matrix<double, 3, 2> basis;
  basis << e1, e2;

  // Unknowns: in-plane t_X (2), a = lambda cos(phi), b = lambda sin(phi).
  Eigen::MatrixXd c(2 * pairs.size(), 4);
  Eigen::VectorXd d(2 * pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    const Mat3 ra = pairs[i].a.rotation.matrix();
    const Eigen::Matrix2d plane_block = basis.transpose() * (ra - Mat3::Identity()) * basis;
    const Vec3 w = r_align * pairs[i].b.translation;
    const double w1 = e1.dot(w);
    const double w2 = e2.dot(w);
    c.block<2, 2>(2 * i, 0) = plane_block;
    c(2 * i, 2) = -w1;
    c(2 * i, 3) = w2;
    c(2 * i + 1, 2) = -w2;
    c(2 * i + 1, 3) = -w1;
    d.segment<2>(2 * i) = -basis.transpose() * pairs[i].a.translation;
  }
  const Eigen::Vector4d sol = c.colPivHouseholderQr().solve(d);
  const double lambda = std::hypot(sol(2), sol(3));
  if (!(lambda > kMinCameraTranslation)) {
    throw Error(ErrorCode::ZeroCameraTranslation, "camera motions carry no in-plane translation");
  }
  const double phi = std::atan2(sol(3), sol(2));
  const Mat3 rx = Eigen::AngleAxisd(phi, n).toRotationMatrix() * r_align;

  PlanarSolution out;
  out.x = {Rotation::from_matrix(rx), basis * sol.head<2>()};
  out.lambda = lambda;
  out.axis = n;
  return out;
}

double max_conjugation_residual(const MotionPairSet& pairs, const RigidTransform& x, double lambda) {
  double worst = 0.0;
  for (const auto& p : pairs) {
    const RigidTransform rhs = x * scaled_motion(p.b, lambda) * x.inverse();
    worst = std::max(worst, (p.a.matrix() - rhs.matrix()).norm());
  }
  return worst;
}

double handeye_residual(const MotionPairSet& pairs, const RigidTransform& x, double lambda) {
  double sum = 0.0;
  for (const auto& p : pairs) {
    sum += ((p.a * x).matrix() - (x * scaled_motion(p.b, lambda)).matrix()).norm();
  }
  return sum;
}

}  // namespace rigrecon
