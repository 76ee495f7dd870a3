#include "rigrecon/optimizer.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <queue>
#include <random>
#include <set>

#include "rigrecon/error.hpp"
#include "rigrecon/problem.hpp"
#include "rigrecon/scene_graph.hpp"

namespace rigrecon {

namespace {

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-12;
constexpr double kScaleDisagreement = 0.02;
constexpr double kScaleCollapse = 6.907755278982137;  // log(1000)
// Step control of the descent: accepted steps grow, rejected ones shrink.
constexpr double kGrow = 1.2;
constexpr double kShrink = 0.5;
constexpr double kMinAlpha = 1e-12;
// Levenberg-Marquardt damping, relative to the diagonal.
constexpr double kInitialDamping = 1e-4;
constexpr double kMinDamping = 1e-12;
constexpr double kMaxDamping = 1e8;

/// p_n = s * R * p_m + t
struct Similarity {
  double s{1.0};
  Mat3 r{Mat3::Identity()};
  Vec3 t{Vec3::Zero()};
};

struct Registration {
  Similarity sim;
  size_t inliers{0};
};

std::optional<Similarity> fit_similarity(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                                         const std::vector<size_t>& idx) {
  Eigen::Matrix3Xd a(3, idx.size());
  Eigen::Matrix3Xd b(3, idx.size());
  for (size_t k = 0; k < idx.size(); ++k) {
    a.col(static_cast<Eigen::Index>(k)) = src[idx[k]];
    b.col(static_cast<Eigen::Index>(k)) = dst[idx[k]];
  }
  const Eigen::Matrix4d m = Eigen::umeyama(a, b, true);
  if (!m.allFinite()) return std::nullopt;
  Similarity s;
  const Mat3 sr = m.topLeftCorner<3, 3>();
  s.s = std::cbrt(sr.determinant());
  if (!(s.s > 0.0)) return std::nullopt;
  s.r = sr / s.s;
  s.t = m.topRightCorner<3, 1>();
  return s;
}

/// RANSAC similarity between the matched points of an edge, mapping view m
/// coordinates into view n coordinates.
std::optional<Registration> register_pair(const std::vector<Vec3>& pn, const std::vector<Vec3>& pm,
                                          const InitOptions& options, std::mt19937_64& rng) {
  if (pn.size() < 3) return std::nullopt;
  std::vector<double> depths;
  for (const auto& p : pn) depths.push_back(p.z());
  std::nth_element(depths.begin(), depths.begin() + static_cast<long>(depths.size() / 2), depths.end());
  const double threshold = options.ransac_threshold * depths[depths.size() / 2];

  auto inliers_of = [&](const Similarity& s) {
    std::vector<size_t> in;
    for (size_t i = 0; i < pn.size(); ++i) {
      if ((pn[i] - (s.s * (s.r * pm[i]) + s.t)).norm() <= threshold) in.push_back(i);
    }
    return in;
  };

  std::uniform_int_distribution<size_t> pick(0, pn.size() - 1);
  std::vector<size_t> best;
  for (int it = 0; it < options.ransac_iterations; ++it) {
    std::vector<size_t> sample{pick(rng), pick(rng), pick(rng)};
    if (sample[0] == sample[1] || sample[1] == sample[2] || sample[0] == sample[2]) continue;
    const Vec3 area = (pm[sample[1]] - pm[sample[0]]).cross(pm[sample[2]] - pm[sample[0]]);
    if (area.norm() < 1e-12) continue;
    const auto s = fit_similarity(pm, pn, sample);
    if (!s) continue;
    auto in = inliers_of(*s);
    if (in.size() > best.size()) best = std::move(in);
  }
  if (best.size() < 3) return std::nullopt;
  std::optional<Similarity> s;
  for (int refine = 0; refine < 2; ++refine) {
    s = fit_similarity(pm, pn, best);
    if (!s) return std::nullopt;
    auto in = inliers_of(*s);
    if (in.size() < 3) break;
    best = std::move(in);
  }
  return Registration{*s, best.size()};
}

Intrinsics initial_intrinsics(const CalibrationProblem& problem, int camera) {
  for (const auto& v : problem.views) {
    if (v.camera == camera && v.intrinsics_prior) return *v.intrinsics_prior;
  }
  Intrinsics k;
  double num = 0.0;
  double den = 0.0;
  for (const auto& v : problem.views) {
    if (v.camera != camera) continue;
    const auto& pm = v.canonical;
    k.width = pm.width;
    k.height = pm.height;
    k.cx = 0.5 * (pm.width - 1);
    k.cy = 0.5 * (pm.height - 1);
    for (size_t i = 0; i < pm.size(); ++i) {
      if (!pm.valid(i) || !(pm.points[i].z() > 0.0)) continue;
      const Vec2 px = pm.pixel_of(i);
      const double a = pm.points[i].x() / pm.points[i].z();
      const double b = pm.points[i].y() / pm.points[i].z();
      num += (px.x() - k.cx) * a + (px.y() - k.cy) * b;
      den += a * a + b * b;
    }
  }
  const double f = den > 0.0 && num > 0.0 ? num / den : std::max(k.width, k.height);
  k.fx = f;
  k.fy = f;
  return k;
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<long>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::InvalidConfig, "max_iterations must be >= 1");
  if (!(step > 0.0) || !(tolerance > 0.0) || window < 1) {
    throw Error(ErrorCode::InvalidConfig, "step, tolerance and window must be positive");
  }
  if (!(pose_step >= 0.0 && scale_step >= 0.0 && intrinsics_step >= 0.0 && extrinsics_step >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "step multipliers must be >= 0");
  }
  if (refine_iterations < 0 || !(refine_tolerance >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "refine settings must be >= 0");
  }
  if (!(warmup_fraction >= 0.0 && ramp_fraction >= 0.0 && warmup_fraction + ramp_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "warmup and ramp fractions must lie in [0, 1]");
  }
}

// ---------------------------------------------------------------------------

Initialization initialize(const CalibrationProblem& problem, const InitOptions& options) {
  const int n_views = static_cast<int>(problem.views.size());
  const int cams = problem.camera_count;
  Initialization init;
  ParameterBlock& p = init.params;
  for (int j = 0; j < cams; ++j) p.intrinsics.push_back(initial_intrinsics(problem, j));

  // Pairwise registration of every graph edge.
  std::mt19937_64 rng(options.seed);
  struct Link {
    int n;
    int m;
    Registration reg;
  };
  std::vector<Link> links;
  for (const auto& e : problem.graph.edges) {
    const auto& vn = problem.views[e.view_n];
    const auto& vm = problem.views[e.view_m];
    std::vector<Vec3> pn;
    std::vector<Vec3> pm;
    for (const auto& mt : e.pairs) {
      const auto zn = depth_at(vn.canonical, mt.pixel_n);
      const auto zm = depth_at(vm.canonical, mt.pixel_m);
      if (!zn || !zm || !(*zn > 0.0) || !(*zm > 0.0)) continue;
      pn.push_back(backproject(mt.pixel_n, *zn, 1.0, p.intrinsics[vn.camera], RigidTransform::identity()));
      pm.push_back(backproject(mt.pixel_m, *zm, 1.0, p.intrinsics[vm.camera], RigidTransform::identity()));
    }
    if (auto reg = register_pair(pn, pm, options, rng)) links.push_back({e.view_n, e.view_m, *reg});
  }

  // Maximum spanning forest on inlier counts, rooted at the lowest view id of
  // each component.
  std::vector<size_t> order(links.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return links[a].reg.inliers > links[b].reg.inliers; });
  std::vector<Edge> forest_edges;
  std::vector<std::vector<std::pair<int, size_t>>> adj(n_views);
  {
    std::vector<int> parent(n_views);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (size_t k : order) {
      const int a = find(links[k].n);
      const int b = find(links[k].m);
      if (a == b) continue;
      parent[std::max(a, b)] = std::min(a, b);
      forest_edges.push_back({std::min(links[k].n, links[k].m), std::max(links[k].n, links[k].m)});
      adj[links[k].n].emplace_back(links[k].m, k);
      adj[links[k].m].emplace_back(links[k].n, k);
    }
  }
  auto [n_components, labels] = connected_components(n_views, forest_edges);
  init.component = labels;
  init.anchors.assign(n_components, -1);
  for (int v = 0; v < n_views; ++v) {
    if (init.anchors[labels[v]] < 0) init.anchors[labels[v]] = v;
  }
  if (n_components > 1) {
    init.warnings.push_back("registration graph has " + std::to_string(n_components) +
                            " components; each is anchored separately");
  }

  // Chain similarities outward from each anchor.
  p.poses.assign(n_views, RigidTransform::identity());
  p.log_sigma.assign(n_views, 0.0);
  std::vector<double> sigma(n_views, 1.0);
  std::vector<Mat3> rot(n_views, Mat3::Identity());
  std::vector<Vec3> trans(n_views, Vec3::Zero());
  std::vector<char> seen(n_views, 0);
  for (int anchor : init.anchors) {
    std::queue<int> q;
    q.push(anchor);
    seen[anchor] = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (const auto& [w, k] : adj[u]) {
        if (seen[w]) continue;
        seen[w] = 1;
        // Similarity mapping w coordinates into u coordinates.
        Similarity s = links[k].reg.sim;
        if (links[k].n != u) {
          Similarity inv;
          inv.s = 1.0 / s.s;
          inv.r = s.r.transpose();
          inv.t = -(inv.s * (inv.r * s.t));
          s = inv;
        }
        sigma[w] = sigma[u] * s.s;
        rot[w] = rot[u] * s.r;
        trans[w] = sigma[u] * (rot[u] * s.t) + trans[u];
        q.push(w);
      }
    }
  }
  for (int v = 0; v < n_views; ++v) {
    p.poses[v] = RigidTransform::from_rt(rot[v], trans[v]);
    p.log_sigma[v] = std::log(sigma[v]);
  }

  // Hand-eye per camera from consecutive views in one component.
  std::vector<std::vector<int>> by_camera(cams);
  for (const auto& v : problem.views) by_camera[v.camera].push_back(v.id);
  for (auto& list : by_camera) {
    std::sort(list.begin(), list.end(),
              [&](int a, int b) { return problem.views[a].pose_index < problem.views[b].pose_index; });
  }
  p.extrinsics.assign(cams, RigidTransform::identity());
  p.log_lambda.assign(cams, 0.0);
  init.cameras.assign(cams, {});
  init.frozen.extrinsic_axis.assign(cams, std::nullopt);
  for (int j = 0; j < cams; ++j) {
    const auto& list = by_camera[j];
    if (list.size() < 2) {
      throw Error(ErrorCode::InsufficientPoses, "camera " + std::to_string(j) + " has fewer than two poses");
    }
    std::vector<RigidTransform> robot_motions;
    MotionPairSet pairs;
    for (size_t k = 0; k + 1 < list.size(); ++k) {
      const int a = list[k];
      const int b = list[k + 1];
      const RigidTransform motion =
          problem.trajectory.motion(problem.views[a].pose_index, problem.views[b].pose_index);
      robot_motions.push_back(motion);
      if (labels[a] == labels[b]) pairs.push_back({motion, p.poses[a].inverse() * p.poses[b]});
    }
    CameraInit& ci = init.cameras[j];
    ci.observability = analyze_observability(robot_motions, options.observability_threshold);
    const std::string tag = "camera " + std::to_string(j) + ": ";

    const bool robot_translates = std::any_of(pairs.begin(), pairs.end(), [](const MotionPair& mp) {
      return mp.a.translation.norm() > 1e-9;
    });
    double lambda = 1.0;
    RigidTransform x = RigidTransform::identity();
    bool solved = false;
    try {
      if (!robot_translates) {
        ci.lambda_fallback = true;
        init.warnings.push_back(tag + "robot translation is zero everywhere; lambda set to 1");
        x = solve_rotation_translation(pairs);
        solved = true;
      } else if (ci.observability.axis_unobservable) {
        const PlanarSolution s = solve_planar_with_scale(pairs, ci.observability.null_axis);
        x = s.x;
        lambda = s.lambda;
        init.frozen.extrinsic_axis[j] = s.axis;
        solved = true;
      } else {
        const ScaledSolution s = solve_with_scale(pairs);
        x = s.x;
        lambda = s.lambda;
        solved = true;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateMotion && e.code() != ErrorCode::ZeroCameraTranslation) throw;
      ci.handeye_fallback = true;
      init.warnings.push_back(tag + "closed-form hand-eye failed (" + e.what() + "); X starts at identity");
    }
    if (!solved || !(lambda > 0.0) || !std::isfinite(lambda)) {
      std::vector<double> ratios;
      for (const auto& mp : pairs) {
        if (mp.a.translation.norm() > 1e-9 && mp.b.translation.norm() > 1e-9) {
          ratios.push_back(mp.a.translation.norm() / mp.b.translation.norm());
        }
      }
      if (!ratios.empty()) {
        lambda = median(ratios);
      } else {
        lambda = 1.0;
        if (!ci.lambda_fallback) init.warnings.push_back(tag + "lambda set to 1");
        ci.lambda_fallback = true;
      }
    }
    if (ci.observability.axis_unobservable && !init.frozen.extrinsic_axis[j]) {
      init.frozen.extrinsic_axis[j] = ci.observability.null_axis;
    }
    p.extrinsics[j] = x;
    p.log_lambda[j] = std::log(lambda);
  }

  // Express every component so that its anchor sits at T^{R_0}_{R_i} X_j at
  // reconstruction scale.
  for (int c = 0; c < n_components; ++c) {
    const int a = init.anchors[c];
    const auto& va = problem.views[a];
    RigidTransform target = problem.trajectory.poses[va.pose_index] * p.extrinsics[va.camera];
    target.translation /= p.lambda(va.camera);
    const RigidTransform g = target * p.poses[a].inverse();
    for (int v = 0; v < n_views; ++v) {
      if (labels[v] == c) p.poses[v] = g * p.poses[v];
    }
  }

  init.frozen.pose.assign(n_views, 0);
  for (int a : init.anchors) init.frozen.pose[a] = 1;
  return init;
}

// ---------------------------------------------------------------------------

namespace {

/// Basis of the free tangent directions. A frozen extrinsic axis n removes the
/// direction that moves n.t, i.e. n.(omega x t + v) = 0.
Eigen::MatrixXd free_basis(const ParameterBlock& params, const FrozenSet& frozen, bool freeze_intrinsics) {
  const Eigen::Index views = params.view_count();
  const Eigen::Index cams = params.camera_count();
  const Eigen::Index dim = static_cast<Eigen::Index>(tangent_dimension(params));
  std::vector<Eigen::VectorXd> cols;
  auto unit = [&](Eigen::Index i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(i) = 1.0;
    cols.push_back(std::move(e));
  };
  auto pose_frozen = [&](Eigen::Index v) { return !frozen.pose.empty() && frozen.pose[v]; };
  for (Eigen::Index v = 0; v < views; ++v) {
    if (!pose_frozen(v)) for (int k = 0; k < 6; ++k) unit(6 * v + k);
  }
  for (Eigen::Index v = 0; v < views; ++v) {
    if (!pose_frozen(v)) unit(6 * views + v);
  }
  if (!freeze_intrinsics) for (Eigen::Index k = 0; k < 4 * cams; ++k) unit(7 * views + k);
  for (Eigen::Index c = 0; c < cams; ++c) unit(7 * views + 4 * cams + c);
  for (Eigen::Index c = 0; c < cams; ++c) {
    const Eigen::Index off = 7 * views + 5 * cams + 6 * c;
    const auto& axis = c < static_cast<Eigen::Index>(frozen.extrinsic_axis.size())
                           ? frozen.extrinsic_axis[c]
                           : std::optional<Vec3>{};
    if (!axis) {
      for (int k = 0; k < 6; ++k) unit(off + k);
      continue;
    }
    Vec6 constraint;
    constraint << params.extrinsics[c].translation.cross(*axis), *axis;
    Eigen::FullPivLU<Eigen::Matrix<double, 1, 6>> lu(constraint.transpose());
    const Eigen::MatrixXd null = lu.kernel();
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(null).householderQ() *
                              Eigen::MatrixXd::Identity(6, null.cols());
    for (Eigen::Index k = 0; k < q.cols(); ++k) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
      e.segment<6>(off) = q.col(k);
      cols.push_back(std::move(e));
    }
  }
  Eigen::MatrixXd basis(dim, static_cast<Eigen::Index>(cols.size()));
  for (size_t k = 0; k < cols.size(); ++k) basis.col(static_cast<Eigen::Index>(k)) = cols[k];
  return basis;
}

ParameterBlock retract(const ParameterBlock& from, const Eigen::VectorXd& step, const FrozenSet& frozen,
                       const std::vector<Vec3>& frozen_axis_value) {
  ParameterBlock out = from;
  const size_t views = from.poses.size();
  const size_t cams = from.intrinsics.size();
  Eigen::Index k = 0;
  // Rotations are re-normalized so thousands of updates do not accumulate drift.
  // A zero step (frozen coordinates) leaves the transform bit-identical.
  auto left_update = [](const Tangent6& d, const RigidTransform& t) {
    if (d.isZero(0.0)) return t;
    RigidTransform r = exp_map(d) * t;
    r.rotation = Rotation(r.rotation.quaternion());
    return r;
  };
  for (size_t v = 0; v < views; ++v, k += 6) out.poses[v] = left_update(step.segment<6>(k), out.poses[v]);
  for (size_t v = 0; v < views; ++v, ++k) out.log_sigma[v] += step(k);
  for (size_t c = 0; c < cams; ++c, k += 4) {
    Intrinsics& in = out.intrinsics[c];
    in.fx += step(k);
    in.fy += step(k + 1);
    in.cx += step(k + 2);
    in.cy += step(k + 3);
  }
  for (size_t c = 0; c < cams; ++c, ++k) out.log_lambda[c] += step(k);
  for (size_t c = 0; c < cams; ++c, k += 6) {
    RigidTransform& x = out.extrinsics[c];
    x = left_update(step.segment<6>(k), x);
    if (c < frozen.extrinsic_axis.size() && frozen.extrinsic_axis[c]) {
      const Vec3& n = *frozen.extrinsic_axis[c];
      x.translation += n * n.dot(frozen_axis_value[c] - x.translation);
    }
  }
  return out;
}

std::vector<Vec3> axis_values(const ParameterBlock& start, const FrozenSet& frozen) {
  std::vector<Vec3> out(start.extrinsics.size(), Vec3::Zero());
  for (size_t c = 0; c < out.size(); ++c) {
    if (c < frozen.extrinsic_axis.size() && frozen.extrinsic_axis[c]) out[c] = start.extrinsics[c].translation;
  }
  return out;
}

}  // namespace

ParameterBlock minimize(const LossEngine& engine, const ParameterBlock& start, const FrozenSet& frozen,
                        const LossWeights& weights, const OptimizerConfig& config, ConvergenceLog& log) {
  config.validate();
  const size_t views = start.poses.size();
  const size_t cams = start.intrinsics.size();
  const size_t dim = tangent_dimension(start);

  Eigen::VectorXd rate(dim);
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim));
  {
    Eigen::Index k = 0;
    for (size_t v = 0; v < views; ++v, k += 6) {
      rate.segment<6>(k).setConstant(config.step * config.pose_step);
      if (!frozen.pose.empty() && frozen.pose[v]) mask.segment<6>(k).setZero();
    }
    for (size_t v = 0; v < views; ++v, ++k) {
      rate(k) = config.step * config.scale_step;
      if (!frozen.pose.empty() && frozen.pose[v]) mask(k) = 0.0;
    }
    for (size_t c = 0; c < cams; ++c, k += 4) {
      rate.segment<4>(k).setConstant(config.step * config.intrinsics_step * start.intrinsics[c].fx);
      if (config.freeze_intrinsics || frozen.intrinsics) mask.segment<4>(k).setZero();
    }
    for (size_t c = 0; c < cams; ++c, ++k) rate(k) = config.step * config.scale_step;
    for (size_t c = 0; c < cams; ++c, k += 6) rate.segment<6>(k).setConstant(config.step * config.extrinsics_step);
  }
  const size_t ext_offset = 7 * views + 5 * cams;

  const std::vector<Vec3> frozen_axis_value = axis_values(start, frozen);

  const int iters = config.max_iterations;
  const int warm_end = static_cast<int>(std::floor(config.warmup_fraction * iters));
  const int ramp_end = static_cast<int>(std::floor((config.warmup_fraction + config.ramp_fraction) * iters));
  auto w2d_scale = [&](int t) {
    if (t < warm_end) return 0.0;
    if (t >= ramp_end) return 1.0;
    return static_cast<double>(t - warm_end + 1) / static_cast<double>(ramp_end - warm_end + 1);
  };

  auto weights_at = [&](int t) {
    LossWeights w = weights;
    w.w2d = weights.w2d * w2d_scale(t);
    return w;
  };
  auto reweighted = [](const LossReport& r, const LossWeights& w) {
    LossReport copy = r;
    copy.weights = w;
    return copy.sum_of_terms();
  };

  auto retract_step = [&](const ParameterBlock& from, const Eigen::VectorXd& step) {
    return retract(from, step, frozen, frozen_axis_value);
  };

  log = ConvergenceLog{};
  ParameterBlock params = start;
  Gradient grad;
  LossReport report = engine.gradient(params, weights_at(0), grad);
  log.initial_loss = reweighted(report, weights);
  if (!std::isfinite(log.initial_loss)) throw Error(ErrorCode::NonFiniteLoss, "initial loss is not finite");
  ParameterBlock best_params = params;
  double best = log.initial_loss;

  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  int moments = 0;
  bool fresh = true;  // gradient of the current point not yet in the moments
  double alpha = 1.0;
  Gradient trial_grad;

  int t = 0;
  for (; t < iters; ++t) {
    const LossWeights w = weights_at(t);
    if (fresh) {
      Eigen::VectorXd g = grad.flatten().cwiseProduct(mask);
      for (size_t c = 0; c < cams; ++c) {
        if (c < frozen.extrinsic_axis.size() && frozen.extrinsic_axis[c]) {
          const Vec3& n = *frozen.extrinsic_axis[c];
          auto v = g.segment<3>(static_cast<Eigen::Index>(ext_offset + 6 * c + 3));
          v -= n * n.dot(v);
        }
      }
      m1 = kAdamBeta1 * m1 + (1.0 - kAdamBeta1) * g;
      m2 = kAdamBeta2 * m2 + (1.0 - kAdamBeta2) * g.cwiseProduct(g);
      ++moments;
      fresh = false;
    }
    const double c1 = 1.0 - std::pow(kAdamBeta1, moments);
    const double c2 = 1.0 - std::pow(kAdamBeta2, moments);
    const Eigen::VectorXd step =
        -(alpha * rate.array() * (m1.array() / c1) / ((m2.array() / c2).sqrt() + kAdamEpsilon)).matrix();
    const ParameterBlock trial = retract_step(params, step);

    LossReport trial_report;
    bool finite = true;
    try {
      trial_report = engine.gradient(trial, weights_at(t + 1), trial_grad);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteLoss) throw;
      finite = false;
    }
    if (finite && reweighted(trial_report, w) <= reweighted(report, w)) {
      params = trial;
      report = trial_report;
      std::swap(grad, trial_grad);
      fresh = true;
      alpha = std::min(1.0, alpha * kGrow);
    } else {
      alpha *= kShrink;
    }
    const double total = reweighted(report, weights);
    if (total < best) {
      best = total;
      best_params = params;
    }
    log.loss.push_back(total);
    log.best.push_back(best);

    if (alpha < kMinAlpha) {
      log.converged = true;
      log.stop_reason = "step collapsed";
      ++t;
      break;
    }
    if (t >= ramp_end + config.window) {
      const double before = log.best[static_cast<size_t>(t - config.window)];
      if (best <= 0.0 || before - best <= config.tolerance * before) {
        log.converged = true;
        log.stop_reason = "relative decrease below tolerance";
        ++t;
        break;
      }
    }
  }
  if (t >= iters && log.stop_reason.empty()) log.stop_reason = "iteration limit";
  log.iterations = t;
  log.final_loss = best;
  return best_params;
}

// ---------------------------------------------------------------------------


ParameterBlock refine(const LossEngine& engine, const ParameterBlock& start, const FrozenSet& frozen,
                      const LossWeights& weights, const OptimizerConfig& config, ConvergenceLog& log) {
  config.validate();
  const std::vector<Vec3> held = axis_values(start, frozen);
  ParameterBlock params = start;
  double loss = engine.total_loss(params, weights).total;
  double damping = kInitialDamping;
  int it = 0;
  std::string reason = "refinement iteration limit";
  for (; it < config.refine_iterations; ++it) {
    const NormalEquations ne = engine.linearize(params, weights);
    const Eigen::MatrixXd basis = free_basis(params, frozen, config.freeze_intrinsics || frozen.intrinsics);
    const Eigen::MatrixXd h = basis.transpose() * ne.hessian * basis;
    const Eigen::VectorXd g = basis.transpose() * ne.gradient;
    const Eigen::VectorXd diag = h.diagonal().cwiseMax(1e-12 * std::max(1.0, h.diagonal().maxCoeff()));
    bool accepted = false;
    double trial_loss = loss;
    while (damping <= kMaxDamping) {
      Eigen::MatrixXd a = h;
      a.diagonal() += damping * diag;
      const Eigen::VectorXd delta = a.ldlt().solve(-g);
      if (delta.allFinite()) {
        const ParameterBlock trial = retract(params, basis * delta, frozen, held);
        try {
          trial_loss = engine.total_loss(trial, weights).total;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NonFiniteLoss) throw;
          trial_loss = std::numeric_limits<double>::infinity();
        }
        if (trial_loss < loss) {
          params = trial;
          accepted = true;
          damping = std::max(kMinDamping, damping / 3.0);
          break;
        }
      }
      damping *= 4.0;
    }
    if (!accepted) {
      reason = "refinement found no decrease";
      break;
    }
    const double previous = loss;
    loss = trial_loss;
    log.loss.push_back(loss);
    log.best.push_back(loss);
    if (previous - loss <= config.refine_tolerance * previous) {
      reason = "refinement converged";
      ++it;
      break;
    }
  }
  log.refine_iterations = it;
  if (config.refine_iterations > 0) log.stop_reason += "; " + reason;
  log.final_loss = loss;
  return params;
}

// ---------------------------------------------------------------------------

void append_view_cloud(const Pointmap& canonical, int view_id, const RigidTransform& pose, double scale,
                       const Intrinsics& k, std::vector<Vec3>& cloud, std::vector<int>& cloud_view) {
  for (size_t i = 0; i < canonical.size(); ++i) {
    if (!canonical.valid(i)) continue;
    const double z = canonical.points[i].z();
    if (!(z > 0.0)) continue;
    cloud.push_back(pose * backproject(canonical.pixel_of(i), z, scale, k, RigidTransform::identity()));
    cloud_view.push_back(view_id);
  }
}

CalibrationResult assemble_result(const CalibrationProblem& problem, const Initialization& init,
                                  const ParameterBlock& params) {
  CalibrationResult out;
  out.parameters = params;
  out.trajectory = problem.trajectory;
  out.warnings = init.warnings;
  const int cams = problem.camera_count;
  const LossEngine engine(problem);

  // Reference view of each (camera, component): the lowest pose index.
  std::map<std::pair<int, int>, int> reference;
  for (int c = 0; c < cams; ++c) {
    for (int v : engine.camera_views(c)) reference.try_emplace({c, init.component[v]}, v);
  }

  for (int j = 0; j < cams; ++j) {
    CameraResult cr;
    cr.extrinsics = params.extrinsics[j];
    cr.lambda = params.lambda(j);
    cr.intrinsics = params.intrinsics[j];
    const auto& obs = init.cameras[j].observability;
    cr.z_unobservable = obs.axis_unobservable;
    cr.unobservable_axis = obs.null_axis;
    cr.min_singular_value = obs.singular_values(2);
    cr.handeye_fallback = init.cameras[j].handeye_fallback;
    cr.lambda_fallback = init.cameras[j].lambda_fallback;
    const auto& list = engine.camera_views(j);
    cr.mean_cal_residual = engine.loss_cal(params, j) / static_cast<double>(list.size() - 1);
    out.cameras.push_back(cr);
  }

  // Metric camera-to-R_0 transform of every view through its reference view.
  auto to_r0 = [&](int v) {
    const auto& view = problem.views[v];
    const int ref = reference.at({view.camera, init.component[v]});
    const RigidTransform rel =
        scaled_motion(params.poses[ref].inverse() * params.poses[v], params.lambda(view.camera));
    return problem.trajectory.poses[problem.views[ref].pose_index] * params.extrinsics[view.camera] * rel;
  };

  for (const auto& view : problem.views) {
    out.views.push_back({view.id, view.camera, view.pose_index, to_r0(view.id), params.sigma(view.id)});
  }
  for (const auto& view : problem.views) {
    append_view_cloud(view.canonical, view.id, out.views[view.id].pose,
                      params.sigma(view.id) * params.lambda(view.camera), params.intrinsics[view.camera], out.cloud,
                      out.cloud_view);
  }

  // Lambda agreement inside each component.
  std::map<int, std::set<int>> cams_of_component;
  for (const auto& v : problem.views) cams_of_component[init.component[v.id]].insert(v.camera);
  for (const auto& [c, set] : cams_of_component) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (int j : set) {
      lo = std::min(lo, params.lambda(j));
      hi = std::max(hi, params.lambda(j));
    }
    if (hi > lo * (1.0 + kScaleDisagreement)) {
      out.warnings.push_back("ScaleDisagreement: lambda estimates of component " + std::to_string(c) +
                             " differ by " + short_number(100.0 * (hi / lo - 1.0)) + "%");
    }
  }
  // A scale driven orders of magnitude away from its closed-form start means
  // the camera's scene terms were satisfied by shrinking (or inflating) it.
  for (int j = 0; j < problem.camera_count; ++j) {
    const double drift = std::abs(params.log_lambda[j] - init.params.log_lambda[j]);
    if (drift > kScaleCollapse) {
      out.warnings.push_back("camera " + std::to_string(j) + ": metric scale moved from " +
                             short_number(init.params.lambda(j)) + " to " + short_number(params.lambda(j)) +
                             "; the scale is probably unconstrained");
    }
  }
  return out;
}

namespace {

/// Fills the unobservable translation of X_j from the camera height above
/// the floor: plane fitted in the metric frame of camera j's first view.
void recover_ground_height(const CalibrationProblem& problem, const Initialization& init,
                           const SolveConfig& config, CalibrationResult& result, int j) {
  CameraResult& cam = result.cameras[j];
  const ParameterBlock& params = result.parameters;
  const double lambda = params.lambda(j);
  std::vector<int> list;
  for (const auto& v : problem.views) {
    if (v.camera == j) list.push_back(v.id);
  }
  std::sort(list.begin(), list.end(),
            [&](int a, int b) { return problem.views[a].pose_index < problem.views[b].pose_index; });
  const int ref = list.front();
  const RigidTransform world_to_ref = params.poses[ref].inverse();

  bool any_mask = false;
  for (int v : list) any_mask |= problem.views[v].ground_mask.has_value();
  std::vector<Vec3> floor;
  std::vector<Vec3> centers;
  for (int v : list) {
    if (init.component[v] != init.component[ref]) continue;
    const auto& view = problem.views[v];
    const auto& pm = view.canonical;
    const RigidTransform pose = params.poses[v];
    centers.push_back(lambda * (world_to_ref * pose.translation));
    for (size_t i = 0; i < pm.size(); ++i) {
      if (!pm.valid(i) || !(pm.points[i].z() > 0.0)) continue;
      if (any_mask && (!view.ground_mask || (*view.ground_mask)[i] == 0)) continue;
      // The view's own 3D estimate, not the pinhole backprojection through the
      // pixel center: the plane fit should not inherit sub-pixel ray offsets.
      const Vec3 w = pose * (params.sigma(v) * pm.points[i]);
      floor.push_back(lambda * (world_to_ref * w));
    }
  }
  PlaneFitOptions opts = config.ground;
  if (!any_mask) {
    opts.min_consensus = std::max(opts.min_consensus, config.unmasked_consensus);
    result.warnings.push_back("camera " + std::to_string(j) +
                              ": no ground masks; fitting the floor to all points");
  }
  const PlaneFit fit = fit_plane(floor, opts, centers.front());
  std::vector<double> heights;
  for (const auto& c : centers) heights.push_back(camera_height(fit.plane, c));
  const HeightEstimate h = recover_z(heights);

  // Orient the robot axis like the camera-frame floor normal (towards the camera).
  Vec3 axis = cam.unobservable_axis.normalized();
  if (init.frozen.extrinsic_axis[j]) axis = init.frozen.extrinsic_axis[j]->normalized();
  const Vec3 normal_robot = cam.extrinsics.rotation * fit.plane.normal;
  if (axis.dot(normal_robot) < 0.0) axis = -axis;
  Vec3& t = cam.extrinsics.translation;
  t += axis * (h.mean - axis.dot(t));
  cam.recovered_z = h;
  result.parameters.extrinsics[j] = cam.extrinsics;
}

}  // namespace

CalibrationResult solve(const Archive& archive, const RobotTrajectory& trajectory, const SolveConfig& config) {
  config.optimizer.validate();
  if (config.threads < 1) throw Error(ErrorCode::InvalidConfig, "threads must be at least 1");
  const CalibrationProblem problem = make_problem(archive, trajectory, config.graph);
  const LossEngine engine(problem, config.threads);
  Initialization init = initialize(problem, config.init);
  init.frozen.intrinsics = config.optimizer.freeze_intrinsics;
  ConvergenceLog log;
  const ParameterBlock descended =
      minimize(engine, init.params, init.frozen, config.weights, config.optimizer, log);
  const ParameterBlock best = refine(engine, descended, init.frozen, config.weights, config.optimizer, log);

  CalibrationResult result = assemble_result(problem, init, best);
  result.log = log;
  for (int j = 0; j < problem.camera_count; ++j) {
    if (!result.cameras[j].z_unobservable) continue;
    try {
      recover_ground_height(problem, init, config, result, j);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoConsensus && e.code() != ErrorCode::InsufficientPoints) throw;
      result.warnings.push_back("camera " + std::to_string(j) + ": ground plane recovery failed (" + e.what() +
                                "); translation along the unobservable axis left unresolved");
    }
  }
  if (std::any_of(result.cameras.begin(), result.cameras.end(), [](const CameraResult& c) { return c.recovered_z; })) {
    // Views and cloud depend on X_j; rebuild them with the recovered heights.
    CalibrationResult rebuilt = assemble_result(problem, init, result.parameters);
    for (size_t j = 0; j < rebuilt.cameras.size(); ++j) rebuilt.cameras[j].recovered_z = result.cameras[j].recovered_z;
    rebuilt.log = result.log;
    rebuilt.warnings = result.warnings;
    result = std::move(rebuilt);
  }
  return result;
}

}  // namespace rigrecon
