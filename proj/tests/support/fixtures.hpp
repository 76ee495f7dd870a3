#pragma once

#include <random>

#include "rigrecon/problem.hpp"
#include "rigrecon/synthetic.hpp"

namespace testing_support {

/// Small scene used by the unit tests; fast to render and to evaluate.
inline rigrecon::ScenarioConfig small_config(bool multi_camera, std::uint64_t seed) {
  rigrecon::ScenarioConfig c = rigrecon::preset(multi_camera ? "memroc-like" : "franka-like");
  c.poses = multi_camera ? 4 : 5;
  c.scene_points = multi_camera ? 900 : 500;
  c.width = 48;
  c.height = 36;
  c.focal = multi_camera ? 30.0 : 42.0;
  c.max_matches = 25;
  c.board.reset();
  c.seed = seed;
  return c;
}

/// Moves every parameter away from `p` by a random amount of the given size.
inline rigrecon::ParameterBlock jitter(const rigrecon::ParameterBlock& p, std::mt19937_64& rng,
                                       double size) {
  using namespace rigrecon;
  std::normal_distribution<double> n(0.0, 1.0);
  auto tangent = [&](double rot, double trans) {
    Tangent6 d;
    d << rot * n(rng), rot * n(rng), rot * n(rng), trans * n(rng), trans * n(rng), trans * n(rng);
    return d;
  };
  ParameterBlock out = p;
  for (auto& t : out.poses) t = exp_map(tangent(size, 0.5 * size)) * t;
  for (auto& s : out.log_sigma) s += 2.0 * size * n(rng);
  for (auto& k : out.intrinsics) {
    k.fx *= 1.0 + 2.0 * size * n(rng);
    k.fy *= 1.0 + 2.0 * size * n(rng);
    k.cx += 50.0 * size * n(rng);
    k.cy += 50.0 * size * n(rng);
  }
  for (auto& l : out.log_lambda) l += 5.0 * size * n(rng);
  for (auto& x : out.extrinsics) x = exp_map(tangent(2.0 * size, size)) * x;
  return out;
}

}  // namespace testing_support
