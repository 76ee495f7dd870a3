#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rigrecon/pointmap.hpp"
#include "rigrecon/scene_graph.hpp"

namespace rigrecon {

/// Board layout: inner-corner counts and square edge length in meters.
struct CheckerboardSpec {
  int rows{0};
  int cols{0};
  double square{0.0};

  [[nodiscard]] int corner_count() const { return rows * cols; }
  void validate() const;
};

/// One image as delivered by the frontend: every pairwise pointmap estimate
/// of the view (all in its own camera frame) plus optional side channels.
struct ArchiveView {
  int id{0};
  int camera{0};
  int pose_index{0};
  int width{0};
  int height{0};
  std::vector<Pointmap> estimates;
  std::optional<Intrinsics> intrinsics_prior;
  std::optional<std::vector<std::uint8_t>> ground_mask;
  std::optional<std::vector<Vec2>> corners;
};

/// In-memory form of the scene inputs.
struct Archive {
  std::vector<ArchiveView> views;  // view id == index
  std::vector<MatchSet> matches;
  CovisibilityMatrix scores;
  std::optional<CheckerboardSpec> board;

  [[nodiscard]] int camera_count() const;
  /// Throws DimensionMismatch, MissingChannel or InvalidArgument.
  void validate() const;
  /// Fuses the estimates of every view into its canonical pointmap.
  [[nodiscard]] std::vector<ViewRecord> view_records() const;
};

}  // namespace rigrecon
