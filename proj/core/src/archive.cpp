#include "rigrecon/archive.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "rigrecon/error.hpp"

namespace rigrecon {

void CheckerboardSpec::validate() const {
  if (rows < 2 || cols < 2) throw Error(ErrorCode::InvalidArgument, "checkerboard needs >= 2x2 corners");
  if (!(square > 0.0)) throw Error(ErrorCode::InvalidArgument, "checkerboard square size must be > 0");
}

int Archive::camera_count() const {
  int m = 0;
  for (const auto& v : views) m = std::max(m, v.camera + 1);
  return m;
}

void Archive::validate() const {
  if (views.empty()) throw Error(ErrorCode::InvalidArgument, "archive has no views");
  const int n = static_cast<int>(views.size());
  std::set<int> cameras;
  for (int i = 0; i < n; ++i) {
    const auto& v = views[i];
    const std::string tag = "view " + std::to_string(i);
    if (v.id != i) throw Error(ErrorCode::InvalidArgument, tag + ": ids must be 0..V-1 in order");
    if (v.camera < 0 || v.pose_index < 0) {
      throw Error(ErrorCode::InvalidArgument, tag + ": negative camera or pose index");
    }
    cameras.insert(v.camera);
    if (v.estimates.empty()) throw Error(ErrorCode::MissingChannel, tag + ": no pointmap estimates");
    for (const auto& e : v.estimates) {
      if (e.width != v.width || e.height != v.height) {
        throw Error(ErrorCode::DimensionMismatch, tag + ": estimate size differs from the view");
      }
      e.validate();
    }
    const size_t pixels = static_cast<size_t>(v.width) * v.height;
    if (v.ground_mask && v.ground_mask->size() != pixels) {
      throw Error(ErrorCode::DimensionMismatch, tag + ": ground mask size differs from the view");
    }
    if (v.intrinsics_prior) v.intrinsics_prior->validate();
    if (v.corners && board && static_cast<int>(v.corners->size()) != board->corner_count()) {
      throw Error(ErrorCode::DimensionMismatch, tag + ": corner count differs from the board");
    }
  }
  if (static_cast<int>(cameras.size()) != camera_count()) {
    throw Error(ErrorCode::InvalidArgument, "camera ids must be contiguous from 0");
  }
  if (scores.size() != n) throw Error(ErrorCode::DimensionMismatch, "score matrix does not match view count");
  scores.validate();
  for (const auto& m : matches) {
    if (m.view_n < 0 || m.view_m < 0 || m.view_n >= n || m.view_m >= n) {
      throw Error(ErrorCode::MissingChannel, "matches reference a view absent from the manifest");
    }
    if (m.view_n == m.view_m) throw Error(ErrorCode::InvalidArgument, "matches of a view with itself");
    for (const auto& p : m.pairs) {
      if (!p.pixel_n.allFinite() || !p.pixel_m.allFinite() || !(p.weight >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "non-finite match or negative weight");
      }
      auto inside = [](const Vec2& px, const ArchiveView& v) {
        return px.x() >= -0.5 && px.y() >= -0.5 && px.x() < v.width - 0.5 && px.y() < v.height - 0.5;
      };
      if (!inside(p.pixel_n, views[m.view_n]) || !inside(p.pixel_m, views[m.view_m])) {
        throw Error(ErrorCode::DimensionMismatch, "match pixel outside the image of its view");
      }
    }
  }
  if (board) board->validate();
}

std::vector<ViewRecord> Archive::view_records() const {
  std::vector<ViewRecord> out;
  out.reserve(views.size());
  for (const auto& v : views) {
    ViewRecord r;
    r.id = v.id;
    r.camera = v.camera;
    r.pose_index = v.pose_index;
    r.canonical = canonical_pointmap(v.estimates);
    r.intrinsics_prior = v.intrinsics_prior;
    r.ground_mask = v.ground_mask;
    r.corners = v.corners;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace rigrecon
