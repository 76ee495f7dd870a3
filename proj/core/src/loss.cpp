#include "rigrecon/loss.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "rigrecon/error.hpp"
#include "parallel.hpp"

namespace rigrecon {

namespace {

constexpr double kMinReprojectionDepth = 1e-9;

double huber(double s, double delta) { return s <= delta ? 0.5 * s * s / delta : s - 0.5 * delta; }
double huber_slope(double s, double delta) { return s <= delta ? s / delta : 1.0; }

/// <N, hat(w)> == w . skew_vee(N)
Vec3 skew_vee(const Mat3& n) {
  return {n(2, 1) - n(1, 2), n(0, 2) - n(2, 0), n(1, 0) - n(0, 1)};
}

/// Camera-frame point of a pixel at canonical depth z and depth scale sigma.
Vec3 camera_point(const Vec2& pixel, double z, double sigma, const Intrinsics& k) {
  const double d = sigma * z;
  return {(pixel.x() - k.cx) / k.fx * d, (pixel.y() - k.cy) / k.fy * d, d};
}

/// Scene-residual contributions of one edge, which only touch its two views
/// and their cameras (slot 0: view_n, slot 1: view_m).
struct EdgePartial {
  double l3d{0.0};
  double l2d{0.0};
  size_t residuals_3d{0};
  size_t residuals_2d{0};
  size_t dropped_2d{0};
  Vec6 pose[2]{Vec6::Zero(), Vec6::Zero()};
  double log_sigma[2]{0.0, 0.0};
  Vec4 intrinsics[2]{Vec4::Zero(), Vec4::Zero()};  // slot 1 unused when both views share a camera
};

/// Accumulates dcost/d(world point) = g into the parameters that produced the
/// constrained point chi = pose * pc.
void accumulate_point(EdgePartial& part, int view_slot, int camera_slot, const Vec3& g, const Vec3& chi,
                      const Vec3& pc, const RigidTransform& pose, const Intrinsics& k) {
  part.pose[view_slot].head<3>() += chi.cross(g);
  part.pose[view_slot].tail<3>() += g;
  part.log_sigma[view_slot] += g.dot(chi - pose.translation);
  const Vec3 gc = pose.rotation.inverse() * g;
  Vec4& gi = part.intrinsics[camera_slot];
  gi(0) -= gc.x() * pc.x() / k.fx;
  gi(1) -= gc.y() * pc.y() / k.fy;
  gi(2) -= gc.x() * pc.z() / k.fx;
  gi(3) -= gc.y() * pc.z() / k.fy;
}

/// Residual of A Y - Y B and its gradient with respect to (R, t) of A, Y, B.
struct HandEyeResidual {
  Mat3 ra, ry, rb;
  Vec3 ta, ty, tb;
  double value{0.0};
  Mat3 gr{Mat3::Zero()};
  Vec3 gt{Vec3::Zero()};

  void evaluate(double w_rot, double w_trans, double scale) {
    const Mat3 dr = ra * ry - ry * rb;
    const Vec3 dt = ra * ty + ta - ry * tb - ty;
    value = std::sqrt(w_rot * dr.squaredNorm() + w_trans * dt.squaredNorm());
    if (value > 0.0) {
      gr = (scale * w_rot / value) * dr;
      gt = (scale * w_trans / value) * dt;
    }
  }
  // d value / d(R_A, t_A)
  [[nodiscard]] Mat3 m_a() const { return gr * ry.transpose() + gt * ty.transpose(); }
  [[nodiscard]] Vec3 g_a() const { return gt; }
  // d value / d(R_B, t_B)
  [[nodiscard]] Mat3 m_b() const { return -ry.transpose() * gr; }
  [[nodiscard]] Vec3 g_b() const { return -ry.transpose() * gt; }
  // d value / d(R_Y, t_Y)
  [[nodiscard]] Mat3 m_y() const {
    return ra.transpose() * gr - gr * rb.transpose() - gt * tb.transpose();
  }
  [[nodiscard]] Vec3 g_y() const { return (ra.transpose() - Mat3::Identity()) * gt; }
};

/// Chains a gradient (m, g) on a scaled relative motion B = S_lambda(T_a^-1 T_b)
/// into the two view poses and log lambda.
void accumulate_motion(Gradient& grad, int view_a, int view_b, int camera, const Mat3& m,
                       const Vec3& g, double lambda, const RigidTransform& pose_a,
                       const RigidTransform& pose_b, const Vec3& t_scaled) {
  const Mat3 rot_a = pose_a.rotation.matrix();
  const Vec3 g_raw = rot_a * (lambda * g);
  const Vec3 k = skew_vee(rot_a * m * pose_b.rotation.matrix().transpose());
  const Vec3 w = k + pose_b.translation.cross(g_raw);
  grad.poses[view_a].head<3>() -= w;
  grad.poses[view_a].tail<3>() -= g_raw;
  grad.poses[view_b].head<3>() += w;
  grad.poses[view_b].tail<3>() += g_raw;
  grad.log_lambda[camera] += g.dot(t_scaled);
}

struct Motion {
  Mat3 r;
  Vec3 t;  // scaled
};

Motion scaled_relative(const RigidTransform& a, const RigidTransform& b, double lambda) {
  const Mat3 ra_t = a.rotation.matrix().transpose();
  return {ra_t * b.rotation.matrix(), lambda * (ra_t * (b.translation - a.translation))};
}

}  // namespace

// ---------------------------------------------------------------------------

void RobotTrajectory::validate() const {
  if (poses.empty()) throw Error(ErrorCode::InvalidArgument, "empty robot trajectory");
  for (const auto& p : poses) {
    if (!p.translation.allFinite() || !p.rotation.quaternion().coeffs().allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "non-finite robot pose");
    }
  }
  if ((poses.front().matrix() - Mat4::Identity()).norm() > 1e-9) {
    throw Error(ErrorCode::FirstPoseNotIdentity, "first robot pose must be the identity");
  }
}

double ParameterBlock::sigma(int view) const { return std::exp(log_sigma[view]); }
double ParameterBlock::lambda(int camera) const { return std::exp(log_lambda[camera]); }

double LossReport::sum_of_terms() const {
  double s = 0.0;
  for (size_t j = 0; j < l3d.size(); ++j) {
    s += weights.w3d * l3d[j] + weights.w2d * l2d[j] + weights.wcal * lcal[j];
  }
  for (const auto& [pair, v] : lcross) s += weights.wcross * v;
  return s;
}

Gradient Gradient::zeros(int views, int cameras) {
  Gradient g;
  g.poses.assign(views, Vec6::Zero());
  g.log_sigma.assign(views, 0.0);
  g.intrinsics.assign(cameras, Vec4::Zero());
  g.log_lambda.assign(cameras, 0.0);
  g.extrinsics.assign(cameras, Vec6::Zero());
  return g;
}

size_t Gradient::dimension() const {
  return 7 * poses.size() + 11 * intrinsics.size();
}

Eigen::VectorXd Gradient::flatten() const {
  Eigen::VectorXd out(dimension());
  Eigen::Index k = 0;
  for (const auto& p : poses) {
    out.segment<6>(k) = p;
    k += 6;
  }
  for (double s : log_sigma) out(k++) = s;
  for (const auto& i : intrinsics) {
    out.segment<4>(k) = i;
    k += 4;
  }
  for (double l : log_lambda) out(k++) = l;
  for (const auto& e : extrinsics) {
    out.segment<6>(k) = e;
    k += 6;
  }
  return out;
}

size_t tangent_dimension(const ParameterBlock& params) {
  return 7 * params.poses.size() + 11 * params.intrinsics.size();
}

void apply_coordinate_step(ParameterBlock& params, size_t index, double step) {
  const size_t v = params.poses.size();
  const size_t c = params.intrinsics.size();
  auto left_step = [&](RigidTransform& t, size_t k) {
    Tangent6 d = Tangent6::Zero();
    d(static_cast<Eigen::Index>(k)) = step;
    t = exp_map(d) * t;
  };
  if (index < 6 * v) {
    left_step(params.poses[index / 6], index % 6);
    return;
  }
  index -= 6 * v;
  if (index < v) {
    params.log_sigma[index] += step;
    return;
  }
  index -= v;
  if (index < 4 * c) {
    Intrinsics& k = params.intrinsics[index / 4];
    switch (index % 4) {
      case 0: k.fx += step; break;
      case 1: k.fy += step; break;
      case 2: k.cx += step; break;
      default: k.cy += step; break;
    }
    return;
  }
  index -= 4 * c;
  if (index < c) {
    params.log_lambda[index] += step;
    return;
  }
  index -= c;
  if (index < 6 * c) {
    left_step(params.extrinsics[index / 6], index % 6);
    return;
  }
  throw Error(ErrorCode::InvalidArgument, "tangent coordinate out of range");
}

// ---------------------------------------------------------------------------

LossEngine::LossEngine(const CalibrationProblem& problem, int threads)
    : problem_(&problem), threads_(threads) {
  if (threads < 1) throw Error(ErrorCode::InvalidArgument, "thread count must be at least 1");
  const auto& views = problem.views;
  if (problem.camera_count < 1) throw Error(ErrorCode::InvalidArgument, "no cameras");
  camera_views_.assign(problem.camera_count, {});
  std::set<std::pair<int, int>> seen;
  for (size_t v = 0; v < views.size(); ++v) {
    const auto& view = views[v];
    if (view.id != static_cast<int>(v)) throw Error(ErrorCode::InvalidArgument, "view ids must be 0..V-1");
    if (view.camera < 0 || view.camera >= problem.camera_count) {
      throw Error(ErrorCode::InvalidArgument, "view camera id out of range");
    }
    if (view.pose_index < 0 || view.pose_index >= static_cast<int>(problem.trajectory.size())) {
      throw Error(ErrorCode::PoseIndexMismatch,
                  "view " + std::to_string(v) + " references a pose index outside the trajectory");
    }
    if (!seen.emplace(view.camera, view.pose_index).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate (camera, pose index)");
    }
    camera_views_[view.camera].push_back(static_cast<int>(v));
  }
  for (auto& list : camera_views_) {
    std::sort(list.begin(), list.end(),
              [&](int a, int b) { return views[a].pose_index < views[b].pose_index; });
  }

  for (const auto& e : problem.graph.edges) {
    if (e.view_n < 0 || e.view_m < 0 || e.view_n >= static_cast<int>(views.size()) ||
        e.view_m >= static_cast<int>(views.size())) {
      throw Error(ErrorCode::UnknownView, "edge references an unknown view");
    }
    PreparedEdge pe;
    pe.view_n = e.view_n;
    pe.view_m = e.view_m;
    pe.owner = views[std::min(e.view_n, e.view_m)].camera;
    pe.matches.reserve(e.pairs.size());
    for (const auto& m : e.pairs) {
      const auto zn = depth_at(views[e.view_n].canonical, m.pixel_n);
      const auto zm = depth_at(views[e.view_m].canonical, m.pixel_m);
      if (!zn || !zm || !(*zn > 0.0) || !(*zm > 0.0)) {
        throw Error(ErrorCode::InvalidMatchedPixel,
                    "match on edge (" + std::to_string(e.view_n) + "," + std::to_string(e.view_m) +
                        ") references an invalid pixel");
      }
      pe.matches.push_back({m.pixel_n, m.pixel_m, m.weight, *zn, *zm});
    }
    edges_.push_back(std::move(pe));
  }
}

int LossEngine::edge_owner(size_t edge) const { return edges_.at(edge).owner; }

std::vector<std::pair<int, int>> LossEngine::cross_pairs() const {
  std::vector<std::pair<int, int>> out;
  const auto& views = problem_->views;
  for (int n = 0; n < problem_->camera_count; ++n) {
    for (int m = n + 1; m < problem_->camera_count; ++m) {
      std::set<int> pn;
      for (int v : camera_views_[n]) pn.insert(views[v].pose_index);
      int common = 0;
      for (int v : camera_views_[m]) common += pn.count(views[v].pose_index) ? 1 : 0;
      if (common >= 2) out.emplace_back(n, m);
    }
  }
  return out;
}

void LossEngine::check_params(const ParameterBlock& params) const {
  const size_t v = problem_->views.size();
  const size_t c = static_cast<size_t>(problem_->camera_count);
  if (params.poses.size() != v || params.log_sigma.size() != v || params.intrinsics.size() != c ||
      params.log_lambda.size() != c || params.extrinsics.size() != c) {
    throw Error(ErrorCode::InvalidArgument, "parameter block does not match the problem size");
  }
}

void LossEngine::scene_terms(const ParameterBlock& params, const LossWeights& w, LossReport& report,
                             Gradient* grad, int only_camera, bool want_3d, bool want_2d) const {
  const auto& views = problem_->views;
  std::vector<EdgePartial> parts(edges_.size());
  detail::parallel_for(edges_.size(), threads_, [&](size_t e) {
    const PreparedEdge& edge = edges_[e];
    if (only_camera >= 0 && edge.owner != only_camera) return;
    EdgePartial& part = parts[e];
    const int vn = edge.view_n;
    const int vm = edge.view_m;
    const int cn = views[vn].camera;
    const int cm = views[vm].camera;
    const int cm_slot = cm == cn ? 0 : 1;
    const RigidTransform& tn = params.poses[vn];
    const RigidTransform& tm = params.poses[vm];
    const Intrinsics& kn = params.intrinsics[cn];
    const Intrinsics& km = params.intrinsics[cm];
    const double sn = params.sigma(vn);
    const double sm = params.sigma(vm);
    const Rotation rn_inv = tn.rotation.inverse();
    const Rotation rm_inv = tm.rotation.inverse();

    for (const auto& p : edge.matches) {
      const Vec3 pcn = camera_point(p.pixel_n, p.depth_n, sn, kn);
      const Vec3 pcm = camera_point(p.pixel_m, p.depth_m, sm, km);
      const Vec3 chi_n = tn * pcn;
      const Vec3 chi_m = tm * pcm;

      if (want_3d) {
        const Vec3 r = chi_n - chi_m;
        const double s = r.norm();
        part.l3d += p.weight * (w.robust ? huber(s, w.huber_3d) : s);
        ++part.residuals_3d;
        if (grad && s > 0.0) {
          const double slope = w.robust ? huber_slope(s, w.huber_3d) : 1.0;
          const Vec3 g = (w.w3d * p.weight * slope / s) * r;
          accumulate_point(part, 0, 0, g, chi_n, pcn, tn, kn);
          accumulate_point(part, 1, cm_slot, -g, chi_m, pcm, tm, km);
        }
      }

      if (want_2d) {
        // chi_m seen from view n, and chi_n seen from view m.
        struct Side {
          int proj_slot, proj_cam_slot, point_slot, point_cam_slot;
          const RigidTransform* proj_pose;
          const Rotation* proj_rot_inv;
          const Intrinsics* proj_k;
          const Vec3* chi;
          const Vec3* pc;
          const RigidTransform* point_pose;
          const Intrinsics* point_k;
          const Vec2* observed;
        };
        const Side sides[2] = {
            {0, 0, 1, cm_slot, &tn, &rn_inv, &kn, &chi_m, &pcm, &tm, &km, &p.pixel_n},
            {1, cm_slot, 0, 0, &tm, &rm_inv, &km, &chi_n, &pcn, &tn, &kn, &p.pixel_m},
        };
        for (const auto& sd : sides) {
          const Vec3 pc = *sd.proj_rot_inv * (*sd.chi - sd.proj_pose->translation);
          if (pc.z() <= kMinReprojectionDepth) {
            ++part.dropped_2d;
            continue;
          }
          const Intrinsics& k = *sd.proj_k;
          const double iz = 1.0 / pc.z();
          const Vec2 proj(k.fx * pc.x() * iz + k.cx, k.fy * pc.y() * iz + k.cy);
          const Vec2 e = *sd.observed - proj;
          const double s = e.norm();
          part.l2d += p.weight * (w.robust ? huber(s, w.huber_2d) : s);
          ++part.residuals_2d;
          if (!grad || !(s > 0.0)) continue;
          const double slope = w.robust ? huber_slope(s, w.huber_2d) : 1.0;
          const Vec2 d_proj = -(w.w2d * p.weight * slope / s) * e;  // dcost / d(projection)
          Eigen::Matrix<double, 2, 3> jac;
          jac << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz,  //
              0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
          const Vec3 g_world = sd.proj_pose->rotation * (jac.transpose() * d_proj);
          part.pose[sd.proj_slot].head<3>() += g_world.cross(*sd.chi);
          part.pose[sd.proj_slot].tail<3>() -= g_world;
          Vec4& gi = part.intrinsics[sd.proj_cam_slot];
          gi(0) += d_proj.x() * pc.x() * iz;
          gi(1) += d_proj.y() * pc.y() * iz;
          gi(2) += d_proj.x();
          gi(3) += d_proj.y();
          accumulate_point(part, sd.point_slot, sd.point_cam_slot, g_world, *sd.chi, *sd.pc,
                           *sd.point_pose, *sd.point_k);
        }
      }
    }
  });

  // Reduction in edge order, independent of the worker count.
  for (size_t e = 0; e < edges_.size(); ++e) {
    const PreparedEdge& edge = edges_[e];
    if (only_camera >= 0 && edge.owner != only_camera) continue;
    const EdgePartial& part = parts[e];
    report.l3d[edge.owner] += part.l3d;
    report.l2d[edge.owner] += part.l2d;
    report.residuals_3d += part.residuals_3d;
    report.residuals_2d += part.residuals_2d;
    report.dropped_2d += part.dropped_2d;
    if (!grad) continue;
    const int v[2] = {edge.view_n, edge.view_m};
    const int c[2] = {views[edge.view_n].camera, views[edge.view_m].camera};
    for (int k = 0; k < 2; ++k) {
      grad->poses[v[k]] += part.pose[k];
      grad->log_sigma[v[k]] += part.log_sigma[k];
      grad->intrinsics[c[k]] += part.intrinsics[k];
    }
  }
}

double LossEngine::cal_term(const ParameterBlock& params, int camera, const LossWeights& w,
                            Gradient* grad, double scale, size_t* terms) const {
  const auto& views = problem_->views;
  const auto& list = camera_views_[camera];
  if (list.size() < 2) {
    throw Error(ErrorCode::InsufficientPoses,
                "camera " + std::to_string(camera) + " has fewer than two robot poses");
  }
  const double lambda = params.lambda(camera);
  const RigidTransform& x = params.extrinsics[camera];
  double sum = 0.0;
  for (size_t k = 0; k + 1 < list.size(); ++k) {
    const int va = list[k];
    const int vb = list[k + 1];
    const RigidTransform a = problem_->trajectory.motion(views[va].pose_index, views[vb].pose_index);
    const Motion b = scaled_relative(params.poses[va], params.poses[vb], lambda);
    HandEyeResidual res{a.rotation.matrix(), x.rotation.matrix(), b.r,
                        a.translation,       x.translation,       b.t};
    res.evaluate(w.w_rot, w.w_trans, scale);
    sum += res.value;
    if (terms) ++*terms;
    if (!grad || !(res.value > 0.0)) continue;
    const Mat3 my = res.m_y();
    const Vec3 gy = res.g_y();
    grad->extrinsics[camera].head<3>() += skew_vee(my * res.ry.transpose()) + res.ty.cross(gy);
    grad->extrinsics[camera].tail<3>() += gy;
    accumulate_motion(*grad, va, vb, camera, res.m_b(), res.g_b(), lambda, params.poses[va],
                      params.poses[vb], b.t);
  }
  return sum;
}

double LossEngine::cross_term(const ParameterBlock& params, int n, int m, const LossWeights& w,
                              Gradient* grad, double scale, size_t* terms) const {
  if (n == m || n < 0 || m < 0 || n >= problem_->camera_count || m >= problem_->camera_count) {
    throw Error(ErrorCode::InvalidArgument, "cross loss needs two distinct cameras");
  }
  const auto& views = problem_->views;
  std::map<int, int> view_n_at;
  for (int v : camera_views_[n]) view_n_at[views[v].pose_index] = v;
  std::vector<std::pair<int, int>> common;  // (view of n, view of m) ordered by pose index
  for (int v : camera_views_[m]) {
    const auto it = view_n_at.find(views[v].pose_index);
    if (it != view_n_at.end()) common.emplace_back(it->second, v);
  }
  if (common.size() < 2) {
    throw Error(ErrorCode::PoseIndexMismatch, "cameras " + std::to_string(n) + " and " +
                                                  std::to_string(m) +
                                                  " share fewer than two pose indices");
  }
  const double lambda_n = params.lambda(n);
  const double lambda_m = params.lambda(m);
  const RigidTransform& xn = params.extrinsics[n];
  const RigidTransform& xm = params.extrinsics[m];
  const RigidTransform y = xn.inverse() * xm;
  const Mat3 rxn = xn.rotation.matrix();
  const Mat3 rxm = xm.rotation.matrix();

  double sum = 0.0;
  for (size_t k = 0; k + 1 < common.size(); ++k) {
    const auto [na, ma] = common[k];
    const auto [nb, mb] = common[k + 1];
    const Motion bn = scaled_relative(params.poses[na], params.poses[nb], lambda_n);
    const Motion bm = scaled_relative(params.poses[ma], params.poses[mb], lambda_m);
    HandEyeResidual res{bn.r, y.rotation.matrix(), bm.r, bn.t, y.translation, bm.t};
    res.evaluate(w.w_rot, w.w_trans, scale);
    sum += res.value;
    if (terms) ++*terms;
    if (!grad || !(res.value > 0.0)) continue;
    accumulate_motion(*grad, na, nb, n, res.m_a(), res.g_a(), lambda_n, params.poses[na],
                      params.poses[nb], bn.t);
    accumulate_motion(*grad, ma, mb, m, res.m_b(), res.g_b(), lambda_m, params.poses[ma],
                      params.poses[mb], bm.t);
    const Mat3 my = res.m_y();
    const Vec3 gy_world = rxn * res.g_y();
    const Vec3 w_rot = skew_vee(rxn * my * rxm.transpose()) + xm.translation.cross(gy_world);
    grad->extrinsics[m].head<3>() += w_rot;
    grad->extrinsics[m].tail<3>() += gy_world;
    grad->extrinsics[n].head<3>() -= w_rot;
    grad->extrinsics[n].tail<3>() -= gy_world;
  }
  return sum;
}

LossReport LossEngine::evaluate(const ParameterBlock& params, const LossWeights& w,
                                Gradient* grad) const {
  check_params(params);
  const int cams = problem_->camera_count;
  LossReport report;
  report.weights = w;
  report.l3d.assign(cams, 0.0);
  report.l2d.assign(cams, 0.0);
  report.lcal.assign(cams, 0.0);
  if (grad) *grad = Gradient::zeros(static_cast<int>(problem_->views.size()), cams);

  scene_terms(params, w, report, grad, -1, true, true);
  for (int j = 0; j < cams; ++j) {
    report.lcal[j] = cal_term(params, j, w, grad, w.wcal, &report.cal_terms);
  }
  if (w.cross_enabled && cams > 1) {
    for (const auto& [n, m] : cross_pairs()) {
      report.lcross[{n, m}] = cross_term(params, n, m, w, grad, w.wcross, &report.cross_terms);
    }
  }
  report.total = report.sum_of_terms();
  if (!std::isfinite(report.total)) {
    throw Error(ErrorCode::NonFiniteLoss, "loss evaluated to a non-finite value");
  }
  return report;
}

double LossEngine::loss_3d(const ParameterBlock& params, int camera, const LossWeights& w) const {
  check_params(params);
  LossReport r;
  r.l3d.assign(problem_->camera_count, 0.0);
  r.l2d.assign(problem_->camera_count, 0.0);
  scene_terms(params, w, r, nullptr, camera, true, false);
  return r.l3d[camera];
}

double LossEngine::loss_2d(const ParameterBlock& params, int camera, const LossWeights& w) const {
  check_params(params);
  LossReport r;
  r.l3d.assign(problem_->camera_count, 0.0);
  r.l2d.assign(problem_->camera_count, 0.0);
  scene_terms(params, w, r, nullptr, camera, false, true);
  return r.l2d[camera];
}

double LossEngine::loss_cal(const ParameterBlock& params, int camera, const LossWeights& w) const {
  check_params(params);
  return cal_term(params, camera, w, nullptr, 1.0, nullptr);
}

double LossEngine::loss_cross(const ParameterBlock& params, int camera_n, int camera_m,
                              const LossWeights& w) const {
  check_params(params);
  return cross_term(params, camera_n, camera_m, w, nullptr, 1.0, nullptr);
}

LossReport LossEngine::total_loss(const ParameterBlock& params, const LossWeights& w) const {
  return evaluate(params, w, nullptr);
}

LossReport LossEngine::gradient(const ParameterBlock& params, const LossWeights& w,
                                Gradient& grad) const {
  return evaluate(params, w, &grad);
}

double loss_3d(const LossEngine& engine, const ParameterBlock& params, int camera) {
  return engine.loss_3d(params, camera);
}
double loss_2d(const LossEngine& engine, const ParameterBlock& params, int camera) {
  return engine.loss_2d(params, camera);
}
double loss_cal(const LossEngine& engine, const ParameterBlock& params, int camera) {
  return engine.loss_cal(params, camera);
}
double loss_cross(const LossEngine& engine, const ParameterBlock& params, int camera_n, int camera_m) {
  return engine.loss_cross(params, camera_n, camera_m);
}
LossReport total_loss(const LossEngine& engine, const ParameterBlock& params,
                      const LossWeights& weights) {
  return engine.total_loss(params, weights);
}

}  // namespace rigrecon
