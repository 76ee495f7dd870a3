#include "rigrecon/pointmap.hpp"

#include <algorithm>
#include <cmath>

#include "rigrecon/error.hpp"

namespace rigrecon {

size_t Pointmap::valid_count() const {
  return static_cast<size_t>(
      std::count_if(confidence.begin(), confidence.end(), [](double c) { return c > 0.0; }));
}

std::optional<size_t> Pointmap::cell_of(const Vec2& pixel) const {
  const double fx = std::floor(pixel.x() + 0.5);
  const double fy = std::floor(pixel.y() + 0.5);
  if (!(fx >= 0.0 && fy >= 0.0 && fx < width && fy < height)) return std::nullopt;
  return index(static_cast<int>(fx), static_cast<int>(fy));
}

void Pointmap::validate() const {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::DimensionMismatch, "empty pointmap grid");
  const size_t n = static_cast<size_t>(width) * height;
  if (points.size() != n || confidence.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "point and confidence grids differ in size");
  }
  bool any_valid = false;
  for (size_t i = 0; i < n; ++i) {
    if (!(confidence[i] >= 0.0) || !std::isfinite(confidence[i])) {
      throw Error(ErrorCode::InvalidArgument, "confidence must be finite and >= 0");
    }
    if (confidence[i] > 0.0) {
      any_valid = true;
      if (!points[i].allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite point");
    }
  }
  if (!any_valid) throw Error(ErrorCode::InvalidArgument, "pointmap has no valid pixel");
}

Pointmap canonical_pointmap(std::span<const Pointmap> estimates) {
  if (estimates.empty()) throw Error(ErrorCode::EmptyEstimates, "no pointmap estimates");
  const int w = estimates.front().width;
  const int h = estimates.front().height;
  for (const auto& e : estimates) {
    if (e.width != w || e.height != h || e.points.size() != e.confidence.size() ||
        e.points.size() != static_cast<size_t>(w) * h) {
      throw Error(ErrorCode::DimensionMismatch, "estimates differ in grid size");
    }
  }
  Pointmap out(w, h);
  for (size_t i = 0; i < out.size(); ++i) {
    double total = 0.0;
    Vec3 acc = Vec3::Zero();
    int contributors = 0;
    const Vec3* only = nullptr;
    for (const auto& e : estimates) {
      const double c = e.confidence[i];
      if (c > 0.0) {
        total += c;
        acc += c * e.points[i];
        ++contributors;
        only = &e.points[i];
      }
    }
    if (total > 0.0) {
      // A lone contributor is copied, not divided back out, so it stays bit-exact.
      out.points[i] = contributors == 1 ? *only : Vec3(acc / total);
      out.confidence[i] = total;
    }
  }
  return out;
}

DepthMap depth_of(const Pointmap& canonical) {
  DepthMap d;
  d.width = canonical.width;
  d.height = canonical.height;
  d.depth.assign(canonical.size(), 0.0);
  d.valid.assign(canonical.size(), 0);
  for (size_t i = 0; i < canonical.size(); ++i) {
    if (canonical.valid(i)) {
      d.depth[i] = canonical.points[i].z();
      d.valid[i] = 1;
    }
  }
  return d;
}

std::optional<double> depth_at(const Pointmap& canonical, const Vec2& pixel) {
  const auto cell = canonical.cell_of(pixel);
  if (!cell || !canonical.valid(*cell)) return std::nullopt;
  return canonical.points[*cell].z();
}

Pointmap constrained_pointmap(const ViewRecord& view, double sigma, const Intrinsics& k,
                              const RigidTransform& pose) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::NonPositiveScale, "sigma must be > 0");
  const Pointmap& src = view.canonical;
  Pointmap out(src.width, src.height);
  for (size_t i = 0; i < src.size(); ++i) {
    if (!src.valid(i)) continue;
    const double z = src.points[i].z();
    if (!(z > 0.0)) continue;  // behind the camera: not representable by the pinhole model
    out.points[i] = backproject(src.pixel_of(i), z, sigma, k, pose);
    out.confidence[i] = src.confidence[i];
  }
  return out;
}

std::optional<Vec3> constrained_point(const Pointmap& canonical, const Vec2& pixel, double sigma,
                                      const Intrinsics& k, const RigidTransform& pose) {
  const auto z = depth_at(canonical, pixel);
  if (!z || !(*z > 0.0)) return std::nullopt;
  return backproject(pixel, *z, sigma, k, pose);
}

}  // namespace rigrecon
