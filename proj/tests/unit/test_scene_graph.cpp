#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "rigrecon/error.hpp"
#include "rigrecon/scene_graph.hpp"

using namespace rigrecon;

namespace {

CovisibilityMatrix random_scores(int n, std::mt19937_64& rng, double zero_share = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CovisibilityMatrix s(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) s.set(i, j, u(rng) < zero_share ? 0.0 : u(rng));
  }
  return s;
}

/// Component count by repeated relabeling; deliberately unrelated to the
/// library's disjoint sets.
int count_components(int n, const std::vector<Edge>& edges) {
  std::vector<int> label(n);
  std::iota(label.begin(), label.end(), 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& e : edges) {
      const int m = std::min(label[e.a], label[e.b]);
      if (label[e.a] != m || label[e.b] != m) {
        label[e.a] = label[e.b] = m;
        changed = true;
      }
    }
  }
  std::sort(label.begin(), label.end());
  return static_cast<int>(std::unique(label.begin(), label.end()) - label.begin());
}

MatchSet matches(int n, int m) { return {n, m, {Match{Vec2(0, 0), Vec2(1, 1), 1.0}}}; }

}  // namespace

TEST(SceneGraph, TwoViewsGiveOneEdge) {
  CovisibilityMatrix s(2);
  s.set(0, 1, 0.9);
  const auto edges = build_graph(s);
  ASSERT_EQ(edges.size(), 1u);
  EXPECT_EQ(edges[0], (Edge{0, 1}));
}

TEST(SceneGraph, ThreeMutualAnchorsGiveCompleteGraph) {
  CovisibilityMatrix s(3);
  s.set(0, 1, 1.0);
  s.set(0, 2, 1.0);
  s.set(1, 2, 1.0);
  GraphOptions o;
  o.anchors = 3;
  EXPECT_EQ(build_graph(s, o), (std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}}));
}

TEST(SceneGraph, RandomScoresGiveConnectedBoundedGraph) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 10;
    const CovisibilityMatrix s = random_scores(n, rng);
    GraphOptions o;
    o.anchors = 4;
    o.neighbors = 2;
    const auto edges = build_graph(s, o);
    EXPECT_EQ(count_components(n, edges), 1);
    const size_t bound = o.anchors * (o.anchors - 1) / 2 + (n - o.anchors) * o.neighbors + (n - 1);
    EXPECT_LE(edges.size(), bound);
    EXPECT_TRUE(std::is_sorted(edges.begin(), edges.end()));
    for (const auto& e : edges) EXPECT_LT(e.a, e.b);
  }
}

TEST(SceneGraph, SparseScoresAreRepairedIntoOneComponent) {
  std::mt19937_64 rng(2);
  // A chain guarantees the full score graph is connected even with most pairs zero.
  CovisibilityMatrix s = random_scores(12, rng, 0.8);
  for (int i = 0; i + 1 < 12; ++i) s.set(i, i + 1, 0.05);
  GraphOptions o;
  o.anchors = 2;
  o.neighbors = 1;
  EXPECT_EQ(count_components(12, build_graph(s, o)), 1);
}

TEST(SceneGraph, ZeroScorePairsNeverBecomeEdges) {
  std::mt19937_64 rng(3);
  const CovisibilityMatrix s = random_scores(9, rng, 0.5);
  for (const auto& e : build_graph(s)) EXPECT_GT(s(e.a, e.b), 0.0);
}

TEST(SceneGraph, ZeroRowWithoutRepairIsDisconnected) {
  CovisibilityMatrix s(3);
  s.set(0, 1, 0.7);
  GraphOptions o;
  o.spanning_tree_repair = false;
  try {
    build_graph(s, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GraphDisconnected);
  }
  o.spanning_tree_repair = true;
  const auto edges = build_graph(s, o);
  EXPECT_EQ(count_components(3, edges), 2);
}

TEST(SceneGraph, ScoreValidation) {
  CovisibilityMatrix s(3);
  s.data()[1] = 0.5;  // (0,1) without (1,0)
  EXPECT_THROW(build_graph(s), Error);
  CovisibilityMatrix t(2);
  t.set(0, 1, 1.5);
  EXPECT_THROW(t.validate(), Error);
}

TEST(SceneGraph, ConnectedComponentsLabels) {
  const auto [count, label] = connected_components(5, {{0, 1}, {3, 4}});
  EXPECT_EQ(count, 3);
  EXPECT_EQ(label[0], label[1]);
  EXPECT_EQ(label[3], label[4]);
  EXPECT_NE(label[0], label[2]);
  EXPECT_NE(label[0], label[3]);
}

TEST(SceneGraph, EdgesOfLeafIsItsTreeEdge) {
  const SceneGraph g = assemble_graph(3, {{0, 1}, {1, 2}}, {matches(0, 1), matches(2, 1)});
  const auto e = edges_of_view(g, 2);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(g.edges[e[0]].view_n, 1);
  EXPECT_EQ(g.edges[e[0]].view_m, 2);
}

TEST(SceneGraph, EdgesOfViewInTriangle) {
  const SceneGraph g =
      assemble_graph(3, {{0, 1}, {0, 2}, {1, 2}}, {matches(0, 1), matches(0, 2), matches(1, 2)});
  const auto e = edges_of_view(g, 0);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(g.edges[e[0]].view_m, 1);
  EXPECT_EQ(g.edges[e[1]].view_m, 2);
  try {
    edges_of_view(g, 7);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::UnknownView);
  }
}

TEST(SceneGraph, EdgesOfViewMatchesLinearScan) {
  std::mt19937_64 rng(4);
  const int n = 10;
  const auto edges = build_graph(random_scores(n, rng), {3, 2, true});
  std::vector<MatchSet> available;
  for (const auto& e : edges) available.push_back(matches(e.a, e.b));
  const SceneGraph g = assemble_graph(n, edges, available);
  for (int v = 0; v < n; ++v) {
    std::vector<size_t> expected;
    for (size_t i = 0; i < g.edges.size(); ++i) {
      if (g.edges[i].view_n == v || g.edges[i].view_m == v) expected.push_back(i);
    }
    EXPECT_EQ(edges_of_view(g, v), expected);
  }
}

TEST(SceneGraph, AssembleFlipsReversedMatchSets) {
  MatchSet reversed{1, 0, {Match{Vec2(5, 6), Vec2(7, 8), 0.5}}};
  const SceneGraph g = assemble_graph(2, {{0, 1}}, {reversed});
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0].view_n, 0);
  EXPECT_EQ(g.edges[0].pairs[0].pixel_n, Vec2(7, 8));
  EXPECT_EQ(g.edges[0].pairs[0].pixel_m, Vec2(5, 6));
}

TEST(SceneGraph, AssembleDropsEdgesWithoutMatches) {
  const SceneGraph g = assemble_graph(3, {{0, 1}, {1, 2}}, {matches(0, 1)});
  EXPECT_EQ(g.edges.size(), 1u);
  EXPECT_NO_THROW(g.validate());
}
