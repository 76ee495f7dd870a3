#include "rigrecon/scene_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "rigrecon/error.hpp"

namespace rigrecon {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

void CovisibilityMatrix::set(int i, int j, double score) {
  s_[static_cast<size_t>(i) * n_ + j] = score;
  s_[static_cast<size_t>(j) * n_ + i] = score;
}

void CovisibilityMatrix::validate() const {
  if (s_.size() != static_cast<size_t>(n_) * n_) {
    throw Error(ErrorCode::DimensionMismatch, "score matrix is not square");
  }
  for (int i = 0; i < n_; ++i) {
    if ((*this)(i, i) != 0.0) throw Error(ErrorCode::InvalidArgument, "non-zero diagonal score");
    for (int j = 0; j < n_; ++j) {
      const double s = (*this)(i, j);
      if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::InvalidArgument, "score outside [0,1]");
      if (std::abs(s - (*this)(j, i)) > 1e-12) {
        throw Error(ErrorCode::InvalidArgument, "score matrix is not symmetric");
      }
    }
  }
}

std::vector<Edge> build_graph(const CovisibilityMatrix& scores, const GraphOptions& options) {
  const int n = scores.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "graph needs at least two views");
  if (options.anchors < 1 || options.neighbors < 1) {
    throw Error(ErrorCode::InvalidArgument, "anchor and neighbor counts must be >= 1");
  }
  scores.validate();

  std::set<Edge> edges;
  auto add = [&](int i, int j) {
    if (i == j || scores(i, j) <= 0.0) return;
    edges.insert(Edge{std::min(i, j), std::max(i, j)});
  };

  // Farthest point sampling in 1 - s, seeded at view 0.
  const int k = std::min(options.anchors, n);
  std::vector<int> anchors{0};
  std::vector<char> is_anchor(n, 0);
  is_anchor[0] = 1;
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(anchors.size()) < k) {
    const int last = anchors.back();
    int best = -1;
    double best_dist = -1.0;
    for (int v = 0; v < n; ++v) {
      min_dist[v] = std::min(min_dist[v], 1.0 - scores(v, last));
      if (!is_anchor[v] && min_dist[v] > best_dist) {
        best_dist = min_dist[v];
        best = v;
      }
    }
    anchors.push_back(best);
    is_anchor[best] = 1;
  }
  for (size_t i = 0; i < anchors.size(); ++i) {
    for (size_t j = i + 1; j < anchors.size(); ++j) add(anchors[i], anchors[j]);
  }

  std::vector<int> order(n);
  for (int v = 0; v < n; ++v) {
    if (is_anchor[v]) continue;
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores(v, a) > scores(v, b); });
    int taken = 0;
    for (int u : order) {
      if (taken == options.neighbors) break;
      if (u == v || scores(v, u) <= 0.0) continue;
      add(v, u);
      ++taken;
    }
  }

  DisjointSets sets(n);
  int components = n;
  for (const auto& e : edges) components -= sets.unite(e.a, e.b) ? 1 : 0;

  if (components > 1 && options.spanning_tree_repair) {
    // Kruskal on descending score, only bridging edges are kept.
    std::vector<Edge> candidates;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (scores(i, j) > 0.0) candidates.push_back({i, j});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](const Edge& x, const Edge& y) {
      return scores(x.a, x.b) > scores(y.a, y.b);
    });
    for (const auto& e : candidates) {
      if (sets.unite(e.a, e.b)) {
        edges.insert(e);
        if (--components == 1) break;
      }
    }
  } else if (components > 1) {
    throw Error(ErrorCode::GraphDisconnected, "co-visibility graph is disconnected");
  }
  return {edges.begin(), edges.end()};
}

std::pair<int, std::vector<int>> connected_components(int vertex_count, const std::vector<Edge>& edges) {
  DisjointSets sets(vertex_count);
  for (const auto& e : edges) sets.unite(e.a, e.b);
  std::vector<int> label(vertex_count, -1);
  std::map<int, int> root_label;
  for (int v = 0; v < vertex_count; ++v) {
    const int r = sets.find(v);
    auto [it, inserted] = root_label.emplace(r, static_cast<int>(root_label.size()));
    label[v] = it->second;
  }
  return {static_cast<int>(root_label.size()), label};
}

void SceneGraph::validate() const {
  std::set<std::pair<int, int>> seen;
  for (const auto& e : edges) {
    if (e.view_n == e.view_m) throw Error(ErrorCode::InvalidArgument, "self-loop edge");
    if (!seen.emplace(std::min(e.view_n, e.view_m), std::max(e.view_n, e.view_m)).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate edge");
    }
    if (e.pairs.empty()) throw Error(ErrorCode::InvalidArgument, "edge without matches");
  }
}

std::vector<size_t> edges_of_view(const SceneGraph& g, int view) {
  if (std::find(g.vertices.begin(), g.vertices.end(), view) == g.vertices.end()) {
    throw Error(ErrorCode::UnknownView, "view " + std::to_string(view) + " is not in the graph");
  }
  std::vector<size_t> out;
  for (size_t i = 0; i < g.edges.size(); ++i) {
    if (g.edges[i].view_n == view || g.edges[i].view_m == view) out.push_back(i);
  }
  std::stable_sort(out.begin(), out.end(), [&](size_t x, size_t y) {
    const auto& ex = g.edges[x];
    const auto& ey = g.edges[y];
    return std::make_pair(std::min(ex.view_n, ex.view_m), std::max(ex.view_n, ex.view_m)) <
           std::make_pair(std::min(ey.view_n, ey.view_m), std::max(ey.view_n, ey.view_m));
  });
  return out;
}

SceneGraph assemble_graph(int view_count, const std::vector<Edge>& edges,
                          const std::vector<MatchSet>& available) {
  std::map<std::pair<int, int>, const MatchSet*> lookup;
  for (const auto& m : available) {
    lookup[{std::min(m.view_n, m.view_m), std::max(m.view_n, m.view_m)}] = &m;
  }
  SceneGraph g;
  g.vertices.resize(view_count);
  std::iota(g.vertices.begin(), g.vertices.end(), 0);
  for (const auto& e : edges) {
    const auto it = lookup.find({e.a, e.b});
    if (it == lookup.end() || it->second->pairs.empty()) continue;
    MatchSet ms = *it->second;
    if (ms.view_n > ms.view_m) {
      std::swap(ms.view_n, ms.view_m);
      for (auto& p : ms.pairs) std::swap(p.pixel_n, p.pixel_m);
    }
    g.edges.push_back(std::move(ms));
  }
  return g;
}

}  // namespace rigrecon
