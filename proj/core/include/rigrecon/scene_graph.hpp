#pragma once

#include <utility>
#include <vector>

#include "rigrecon/pointmap.hpp"

namespace rigrecon {

/// Symmetric pairwise co-visibility scores in [0, 1] with zero diagonal.
class CovisibilityMatrix {
 public:
  CovisibilityMatrix() = default;
  explicit CovisibilityMatrix(int n) : n_(n), s_(static_cast<size_t>(n) * n, 0.0) {}

  [[nodiscard]] int size() const { return n_; }
  [[nodiscard]] double operator()(int i, int j) const { return s_[static_cast<size_t>(i) * n_ + j]; }
  /// Sets both (i, j) and (j, i).
  void set(int i, int j, double score);
  [[nodiscard]] const std::vector<double>& data() const { return s_; }
  std::vector<double>& data() { return s_; }

  /// Throws InvalidArgument on asymmetry (> 1e-12), out-of-range entries or a
  /// non-zero diagonal.
  void validate() const;

 private:
  int n_{0};
  std::vector<double> s_;
};

struct Edge {
  int a{0};
  int b{0};  // a < b
  auto operator<=>(const Edge&) const = default;
};

struct GraphOptions {
  int anchors{10};
  int neighbors{3};
  bool spanning_tree_repair{true};
};

/// Sparse co-visibility graph: farthest-point-sampled anchors (in 1 - s
/// dissimilarity) connected pairwise, every other view linked to its best
/// `neighbors` views, and maximum-score spanning-tree edges bridging whatever
/// components remain. Zero-score pairs never become edges, so views without
/// any shared content stay in separate components. Edges are sorted.
std::vector<Edge> build_graph(const CovisibilityMatrix& scores, const GraphOptions& options = {});

/// Number of connected components and the component label of every vertex.
std::pair<int, std::vector<int>> connected_components(int vertex_count, const std::vector<Edge>& edges);

struct SceneGraph {
  std::vector<int> vertices;      // view ids, 0..V-1
  std::vector<MatchSet> edges;    // view_n < view_m, sorted, each non-empty

  /// Throws InvalidArgument on self-loops, duplicates or empty match sets.
  void validate() const;
};

/// Indices into `g.edges` of the edges touching `view`, ordered by (min, max).
/// Throws UnknownView.
std::vector<size_t> edges_of_view(const SceneGraph& g, int view);

/// Builds a SceneGraph from selected edges, attaching matches from `available`
/// (looked up by unordered pair). Edges without matches are dropped.
SceneGraph assemble_graph(int view_count, const std::vector<Edge>& edges,
                          const std::vector<MatchSet>& available);

}  // namespace rigrecon
