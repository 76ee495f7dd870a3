#include "rigrecon/ground_plane.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "rigrecon/error.hpp"

namespace rigrecon {

namespace {

constexpr double kCollinear = 1e-12;

PlaneModel least_squares(std::span<const Vec3> points, const std::vector<size_t>& subset) {
  Vec3 mean = Vec3::Zero();
  for (size_t i : subset) mean += points[i];
  mean /= static_cast<double>(subset.size());
  Mat3 cov = Mat3::Zero();
  for (size_t i : subset) {
    const Vec3 d = points[i] - mean;
    cov += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 n = eig.eigenvectors().col(0).normalized();
  return {n, n.dot(mean)};
}

}  // namespace

PlaneFit fit_plane(std::span<const Vec3> points, const PlaneFitOptions& options, const Vec3& viewpoint) {
  if (points.size() < 3) throw Error(ErrorCode::InsufficientPoints, "plane fit needs at least 3 points");
  {
    // Rank check: all points on one line leave the plane undetermined.
    Vec3 mean = Vec3::Zero();
    for (const auto& p : points) mean += p;
    mean /= static_cast<double>(points.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : points) cov += (p - mean) * (p - mean).transpose();
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    if (eig.eigenvalues()(1) <= kCollinear * std::max(1.0, eig.eigenvalues()(2))) {
      throw Error(ErrorCode::InsufficientPoints, "points are collinear");
    }
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<size_t> pick(0, points.size() - 1);
  PlaneModel best;
  size_t best_count = 0;
  for (int it = 0; it < options.iterations; ++it) {
    const size_t a = pick(rng);
    const size_t b = pick(rng);
    const size_t c = pick(rng);
    const Vec3 n = (points[b] - points[a]).cross(points[c] - points[a]);
    if (n.norm() < 1e-12) continue;
    const PlaneModel m{n.normalized(), n.normalized().dot(points[a])};
    size_t count = 0;
    for (const auto& p : points) count += std::abs(m.signed_distance(p)) <= options.inlier_threshold ? 1 : 0;
    if (count > best_count) {
      best_count = count;
      best = m;
    }
  }
  if (best_count < 3) throw Error(ErrorCode::NoConsensus, "no plane hypothesis found");

  PlaneFit fit;
  PlaneModel current = best;
  for (int refine = 0; refine < 3; ++refine) {
    std::vector<size_t> inliers;
    for (size_t i = 0; i < points.size(); ++i) {
      if (std::abs(current.signed_distance(points[i])) <= options.inlier_threshold) inliers.push_back(i);
    }
    if (inliers.size() < 3) break;
    fit.inliers = std::move(inliers);
    current = least_squares(points, fit.inliers);
  }
  if (fit.inliers.empty()) {
    for (size_t i = 0; i < points.size(); ++i) {
      if (std::abs(best.signed_distance(points[i])) <= options.inlier_threshold) fit.inliers.push_back(i);
    }
    current = best;
  }
  fit.inlier_ratio = static_cast<double>(fit.inliers.size()) / static_cast<double>(points.size());
  if (fit.inlier_ratio < options.min_consensus) {
    throw Error(ErrorCode::NoConsensus, "plane inlier ratio " + std::to_string(fit.inlier_ratio) +
                                            " is below " + std::to_string(options.min_consensus));
  }
  if (current.signed_distance(viewpoint) < 0.0) {
    current.normal = -current.normal;
    current.offset = -current.offset;
  }
  fit.plane = current;
  return fit;
}

double camera_height(const PlaneModel& plane, const Vec3& center) {
  return std::abs(plane.signed_distance(center));
}

HeightEstimate recover_z(std::span<const double> heights) {
  if (heights.empty()) throw Error(ErrorCode::EmptyInput, "no heights to average");
  HeightEstimate h;
  for (double d : heights) h.mean += d;
  h.mean /= static_cast<double>(heights.size());
  double var = 0.0;
  for (double d : heights) var += (d - h.mean) * (d - h.mean);
  h.stddev = std::sqrt(var / static_cast<double>(heights.size()));
  return h;
}

}  // namespace rigrecon
