// Reweighted Gauss-Newton linearization of the unified loss. Residual
// Jacobians follow the same left-increment conventions as LossEngine::gradient.
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "parallel.hpp"
#include "rigrecon/loss.hpp"

namespace rigrecon {

namespace {

constexpr double kMinReprojectionDepth = 1e-9;

/// Flattened coordinate offsets, matching Gradient::flatten().
struct Layout {
  Eigen::Index views, cameras;
  [[nodiscard]] Eigen::Index pose(int v) const { return 6 * v; }
  [[nodiscard]] Eigen::Index sigma(int v) const { return 6 * views + v; }
  [[nodiscard]] Eigen::Index intrinsics(int c) const { return 7 * views + 4 * c; }
  [[nodiscard]] Eigen::Index lambda(int c) const { return 7 * views + 4 * cameras + c; }
  [[nodiscard]] Eigen::Index extrinsics(int c) const { return 7 * views + 5 * cameras + 6 * c; }
};

/// Sparse Jacobian of one residual block; repeated coordinates are merged.
template <int R>
struct LocalJacobian {
  using Column = Eigen::Matrix<double, R, 1>;
  std::vector<std::pair<Eigen::Index, Column>> cols;

  void add(Eigen::Index index, const Column& c) {
    for (auto& [i, col] : cols) {
      if (i == index) {
        col += c;
        return;
      }
    }
    cols.emplace_back(index, c);
  }

  /// `local` maps a global coordinate to its row in `hessian` / `gradient`.
  template <class Map>
  void accumulate(Eigen::MatrixXd& hessian, Eigen::VectorXd& gradient, double weight, const Column& r,
                  const Map& local) const {
    for (size_t a = 0; a < cols.size(); ++a) {
      const auto& [ga, ca] = cols[a];
      const Eigen::Index ia = local(ga);
      gradient(ia) += weight * ca.dot(r);
      for (size_t b = a; b < cols.size(); ++b) {
        const auto& [gb, cb] = cols[b];
        const Eigen::Index ib = local(gb);
        const double h = weight * ca.dot(cb);
        hessian(ia, ib) += h;
        if (ia != ib) hessian(ib, ia) += h;
      }
    }
  }

  void accumulate(NormalEquations& out, double weight, const Column& r) const {
    accumulate(out.hessian, out.gradient, weight, r, [](Eigen::Index i) { return i; });
  }
};

/// Scene-residual normal equations of one edge over the coordinates it
/// touches: pose and sigma of both views, intrinsics of one or two cameras.
struct EdgeSystem {
  Eigen::Index pose_n, sigma_n, pose_m, sigma_m, k_n, k_m;
  bool shared_camera;
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  double loss{0.0};

  EdgeSystem(const Layout& lay, int vn, int vm, int cn, int cm)
      : pose_n(lay.pose(vn)), sigma_n(lay.sigma(vn)), pose_m(lay.pose(vm)), sigma_m(lay.sigma(vm)),
        k_n(lay.intrinsics(cn)), k_m(lay.intrinsics(cm)), shared_camera(cn == cm) {
    hessian = Eigen::MatrixXd::Zero(size(), size());
    gradient = Eigen::VectorXd::Zero(size());
  }

  [[nodiscard]] Eigen::Index size() const { return shared_camera ? 18 : 22; }

  /// Local row of global coordinate g (which must belong to the edge).
  [[nodiscard]] Eigen::Index local(Eigen::Index g) const {
    if (g >= pose_n && g < pose_n + 6) return g - pose_n;
    if (g == sigma_n) return 6;
    if (g >= pose_m && g < pose_m + 6) return 7 + (g - pose_m);
    if (g == sigma_m) return 13;
    if (g >= k_n && g < k_n + 4) return 14 + (g - k_n);
    return 18 + (g - k_m);
  }

  [[nodiscard]] Eigen::Index global(Eigen::Index i) const {
    if (i < 6) return pose_n + i;
    if (i == 6) return sigma_n;
    if (i < 13) return pose_m + (i - 7);
    if (i == 13) return sigma_m;
    if (i < 18) return k_n + (i - 14);
    return k_m + (i - 18);
  }

  void merge_into(NormalEquations& out) const {
    for (Eigen::Index a = 0; a < size(); ++a) {
      const Eigen::Index ga = global(a);
      out.gradient(ga) += gradient(a);
      for (Eigen::Index b = 0; b < size(); ++b) out.hessian(ga, global(b)) += hessian(a, b);
    }
    out.loss += loss;
  }
};

Vec3 camera_point(const Vec2& pixel, double z, double sigma, const Intrinsics& k) {
  const double d = sigma * z;
  return {(pixel.x() - k.cx) / k.fx * d, (pixel.y() - k.cy) / k.fy * d, d};
}

/// d(world point)/d(params) of chi = pose * pc, pushed through `left`.
template <int R>
void point_columns(LocalJacobian<R>& jac, const Layout& lay, const Eigen::Matrix<double, R, 3>& left,
                   int view, int camera, const Vec3& chi, const Vec3& pc,
                   const RigidTransform& pose, const Intrinsics& k) {
  const Mat3 rot = pose.rotation.matrix();
  const Mat3 d_omega = -hat(chi);
  for (int i = 0; i < 3; ++i) {
    jac.add(lay.pose(view) + i, left * d_omega.col(i));
    jac.add(lay.pose(view) + 3 + i, left.col(i));
  }
  jac.add(lay.sigma(view), left * (chi - pose.translation));
  const Eigen::Matrix<double, R, 3> lr = left * rot;
  jac.add(lay.intrinsics(camera) + 0, lr.col(0) * (-pc.x() / k.fx));
  jac.add(lay.intrinsics(camera) + 1, lr.col(1) * (-pc.y() / k.fy));
  jac.add(lay.intrinsics(camera) + 2, lr.col(0) * (-pc.z() / k.fx));
  jac.add(lay.intrinsics(camera) + 3, lr.col(1) * (-pc.z() / k.fy));
}

/// First-order variation of one factor of A Y - Y B.
struct Variation {
  Mat3 dr{Mat3::Zero()};
  Vec3 dt{Vec3::Zero()};
};

using Vec12 = Eigen::Matrix<double, 12, 1>;

struct HandEyeBlock {
  Mat3 ra, ry, rb;
  Vec3 ta, ty, tb;
  double sw_rot, sw_trans;

  [[nodiscard]] Vec12 residual() const {
    const Mat3 dr = ra * ry - ry * rb;
    const Vec3 dt = ra * ty + ta - ry * tb - ty;
    Vec12 r;
    r.head<9>() = sw_rot * Eigen::Map<const Eigen::Matrix<double, 9, 1>>(dr.data());
    r.tail<3>() = sw_trans * dt;
    return r;
  }
  [[nodiscard]] Vec12 pack(const Mat3& dr, const Vec3& dt) const {
    Vec12 r;
    r.head<9>() = sw_rot * Eigen::Map<const Eigen::Matrix<double, 9, 1>>(dr.data());
    r.tail<3>() = sw_trans * dt;
    return r;
  }
  [[nodiscard]] Vec12 via_a(const Variation& d) const { return pack(d.dr * ry, d.dr * ty + d.dt); }
  [[nodiscard]] Vec12 via_y(const Variation& d) const {
    return pack(ra * d.dr - d.dr * rb, ra * d.dt - d.dr * tb - d.dt);
  }
  [[nodiscard]] Vec12 via_b(const Variation& d) const { return pack(-ry * d.dr, -ry * d.dt); }
};

/// Variations of B = S_lambda(T_a^-1 T_b) under generator k of pose a (or b).
Variation motion_variation(const RigidTransform& a, const RigidTransform& b, double lambda,
                           int k, bool of_b) {
  Vec3 w = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  (k < 3 ? w : v)(k % 3) = 1.0;
  const Mat3 ra_t = a.rotation.matrix().transpose();
  const double sign = of_b ? 1.0 : -1.0;
  Variation d;
  d.dr = sign * ra_t * hat(w) * b.rotation.matrix();
  d.dt = sign * lambda * ra_t * (w.cross(b.translation) + v);
  return d;
}

struct Motion {
  Mat3 r;
  Vec3 t;
};

Motion scaled_relative(const RigidTransform& a, const RigidTransform& b, double lambda) {
  const Mat3 ra_t = a.rotation.matrix().transpose();
  return {ra_t * b.rotation.matrix(), lambda * (ra_t * (b.translation - a.translation))};
}

void motion_columns(LocalJacobian<12>& jac, const Layout& lay, const HandEyeBlock& he, bool as_a,
                    int va, int vb, int camera, const RigidTransform& pa, const RigidTransform& pb,
                    double lambda, const Vec3& t_scaled) {
  auto push = [&](const Variation& d) { return as_a ? he.via_a(d) : he.via_b(d); };
  for (int k = 0; k < 6; ++k) {
    jac.add(lay.pose(va) + k, push(motion_variation(pa, pb, lambda, k, false)));
    jac.add(lay.pose(vb) + k, push(motion_variation(pa, pb, lambda, k, true)));
  }
  Variation dl;
  dl.dt = t_scaled;
  jac.add(lay.lambda(camera), push(dl));
}

}  // namespace

NormalEquations LossEngine::linearize(const ParameterBlock& params, const LossWeights& w,
                                      double min_norm) const {
  check_params(params);
  const auto& views = problem_->views;
  const int cams = problem_->camera_count;
  const Layout lay{static_cast<Eigen::Index>(views.size()), cams};
  const Eigen::Index dim = static_cast<Eigen::Index>(tangent_dimension(params));
  NormalEquations out;
  out.hessian = Eigen::MatrixXd::Zero(dim, dim);
  out.gradient = Eigen::VectorXd::Zero(dim);

  // cost = c * rho(s); IRLS weight c * rho'(s) / s.
  auto irls = [min_norm](double& loss, double c, double s, bool robust, double delta) {
    if (robust) {
      if (s <= delta) {
        loss += c * 0.5 * s * s / delta;
        return c / delta;
      }
      loss += c * (s - 0.5 * delta);
      return c / s;
    }
    loss += c * s;
    return c / std::max(s, min_norm);
  };

  std::vector<std::optional<EdgeSystem>> systems(edges_.size());
  detail::parallel_for(edges_.size(), threads_, [&](size_t ei) {
    const PreparedEdge& edge = edges_[ei];
    const int vn = edge.view_n;
    const int vm = edge.view_m;
    const int cn = views[vn].camera;
    const int cm = views[vm].camera;
    const RigidTransform& tn = params.poses[vn];
    const RigidTransform& tm = params.poses[vm];
    const Intrinsics& kn = params.intrinsics[cn];
    const Intrinsics& km = params.intrinsics[cm];
    const double sn = params.sigma(vn);
    const double sm = params.sigma(vm);
    EdgeSystem& sys = systems[ei].emplace(lay, vn, vm, cn, cm);
    auto local = [&sys](Eigen::Index g) { return sys.local(g); };

    for (const auto& p : edge.matches) {
      const Vec3 pcn = camera_point(p.pixel_n, p.depth_n, sn, kn);
      const Vec3 pcm = camera_point(p.pixel_m, p.depth_m, sm, km);
      const Vec3 chi_n = tn * pcn;
      const Vec3 chi_m = tm * pcm;

      {
        const Vec3 r = chi_n - chi_m;
        const double weight = irls(sys.loss, w.w3d * p.weight, r.norm(), w.robust, w.huber_3d);
        LocalJacobian<3> jac;
        point_columns<3>(jac, lay, Mat3::Identity(), vn, cn, chi_n, pcn, tn, kn);
        point_columns<3>(jac, lay, -Mat3::Identity(), vm, cm, chi_m, pcm, tm, km);
        jac.accumulate(sys.hessian, sys.gradient, weight, r, local);
      }

      struct Reprojection {
        int proj_view, proj_cam, point_view, point_cam;
        const RigidTransform* proj_pose;
        const Intrinsics* proj_k;
        const Vec3* chi;
        const Vec3* pc;
        const RigidTransform* point_pose;
        const Intrinsics* point_k;
        const Vec2* observed;
      };
      const Reprojection sides[2] = {
          {vn, cn, vm, cm, &tn, &kn, &chi_m, &pcm, &tm, &km, &p.pixel_n},
          {vm, cm, vn, cn, &tm, &km, &chi_n, &pcn, &tn, &kn, &p.pixel_m},
      };
      for (const auto& sd : sides) {
        const Mat3 r_inv = sd.proj_pose->rotation.matrix().transpose();
        const Vec3 pc = r_inv * (*sd.chi - sd.proj_pose->translation);
        if (pc.z() <= kMinReprojectionDepth) continue;
        const Intrinsics& k = *sd.proj_k;
        const double iz = 1.0 / pc.z();
        const Vec2 e = *sd.observed - Vec2(k.fx * pc.x() * iz + k.cx, k.fy * pc.y() * iz + k.cy);
        const double weight = irls(sys.loss, w.w2d * p.weight, e.norm(), w.robust, w.huber_2d);
        Eigen::Matrix<double, 2, 3> jpi;
        jpi << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz,  //
            0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
        const Eigen::Matrix<double, 2, 3> de_dp = -jpi;
        LocalJacobian<2> jac;
        const Mat3 d_omega = r_inv * hat(*sd.chi);
        for (int i = 0; i < 3; ++i) {
          jac.add(lay.pose(sd.proj_view) + i, de_dp * d_omega.col(i));
          jac.add(lay.pose(sd.proj_view) + 3 + i, -(de_dp * r_inv.col(i)));
        }
        const Eigen::Index ki = lay.intrinsics(sd.proj_cam);
        jac.add(ki + 0, Vec2(-pc.x() * iz, 0.0));
        jac.add(ki + 1, Vec2(0.0, -pc.y() * iz));
        jac.add(ki + 2, Vec2(-1.0, 0.0));
        jac.add(ki + 3, Vec2(0.0, -1.0));
        point_columns<2>(jac, lay, de_dp * r_inv, sd.point_view, sd.point_cam, *sd.chi, *sd.pc,
                         *sd.point_pose, *sd.point_k);
        jac.accumulate(sys.hessian, sys.gradient, weight, e, local);
      }
    }
  });
  for (const auto& sys : systems) sys->merge_into(out);

  const double sw_rot = std::sqrt(w.w_rot);
  const double sw_trans = std::sqrt(w.w_trans);

  for (int c = 0; c < cams; ++c) {
    const auto& list = camera_views_[c];
    const double lambda = params.lambda(c);
    const RigidTransform& x = params.extrinsics[c];
    for (size_t k = 0; k + 1 < list.size(); ++k) {
      const int va = list[k];
      const int vb = list[k + 1];
      const RigidTransform a =
          problem_->trajectory.motion(views[va].pose_index, views[vb].pose_index);
      const Motion b = scaled_relative(params.poses[va], params.poses[vb], lambda);
      const HandEyeBlock he{a.rotation.matrix(), x.rotation.matrix(), b.r, a.translation,
                            x.translation,       b.t,                 sw_rot, sw_trans};
      const Vec12 r = he.residual();
      const double weight = irls(out.loss, w.wcal, r.norm(), false, 0.0);
      LocalJacobian<12> jac;
      for (int g = 0; g < 6; ++g) {
        Vec3 om = Vec3::Zero();
        Vec3 v = Vec3::Zero();
        (g < 3 ? om : v)(g % 3) = 1.0;
        Variation dy{hat(om) * he.ry, om.cross(he.ty) + v};
        jac.add(lay.extrinsics(c) + g, he.via_y(dy));
      }
      motion_columns(jac, lay, he, false, va, vb, c, params.poses[va], params.poses[vb], lambda,
                     b.t);
      jac.accumulate(out, weight, r);
    }
  }

  if (w.cross_enabled && cams > 1) {
    for (const auto& [n, m] : cross_pairs()) {
      std::map<int, int> view_n_at;
      for (int v : camera_views_[n]) view_n_at[views[v].pose_index] = v;
      std::vector<std::pair<int, int>> common;
      for (int v : camera_views_[m]) {
        const auto it = view_n_at.find(views[v].pose_index);
        if (it != view_n_at.end()) common.emplace_back(it->second, v);
      }
      const double lambda_n = params.lambda(n);
      const double lambda_m = params.lambda(m);
      const RigidTransform& xn = params.extrinsics[n];
      const RigidTransform& xm = params.extrinsics[m];
      const RigidTransform y = xn.inverse() * xm;
      const Mat3 rxn_t = xn.rotation.matrix().transpose();
      const Mat3 rxm = xm.rotation.matrix();
      for (size_t k = 0; k + 1 < common.size(); ++k) {
        const auto [na, ma] = common[k];
        const auto [nb, mb] = common[k + 1];
        const Motion bn = scaled_relative(params.poses[na], params.poses[nb], lambda_n);
        const Motion bm = scaled_relative(params.poses[ma], params.poses[mb], lambda_m);
        const HandEyeBlock he{bn.r, y.rotation.matrix(), bm.r, bn.t, y.translation, bm.t,
                              sw_rot, sw_trans};
        const Vec12 r = he.residual();
        const double weight = irls(out.loss, w.wcross, r.norm(), false, 0.0);
        LocalJacobian<12> jac;
        motion_columns(jac, lay, he, true, na, nb, n, params.poses[na], params.poses[nb],
                       lambda_n, bn.t);
        motion_columns(jac, lay, he, false, ma, mb, m, params.poses[ma], params.poses[mb],
                       lambda_m, bm.t);
        for (int g = 0; g < 6; ++g) {
          Vec3 om = Vec3::Zero();
          Vec3 v = Vec3::Zero();
          (g < 3 ? om : v)(g % 3) = 1.0;
          // Y = X_n^-1 X_m: a left increment of X_m moves Y by +d, of X_n by -d.
          const Variation d{rxn_t * hat(om) * rxm, rxn_t * (om.cross(xm.translation) + v)};
          const Vec12 col = he.via_y(d);
          jac.add(lay.extrinsics(m) + g, col);
          jac.add(lay.extrinsics(n) + g, -col);
        }
        jac.accumulate(out, weight, r);
      }
    }
  }
  return out;
}

}  // namespace rigrecon
