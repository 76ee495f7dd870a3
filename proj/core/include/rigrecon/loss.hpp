#pragma once

#include <map>
#include <utility>
#include <vector>

#include "rigrecon/geometry.hpp"
#include "rigrecon/pointmap.hpp"
#include "rigrecon/scene_graph.hpp"

namespace rigrecon {

/// Robot poses T^{R_0}_{R_i}, indexed by pose index. The first pose is the identity.
struct RobotTrajectory {
  std::vector<RigidTransform> poses;

  [[nodiscard]] size_t size() const { return poses.size(); }
  /// Relative motion A = (T^{R_0}_{R_a})^-1 T^{R_0}_{R_b}.
  [[nodiscard]] RigidTransform motion(int a, int b) const { return poses[a].inverse() * poses[b]; }
  /// Throws InvalidArgument on non-finite poses or a non-identity first pose.
  void validate() const;
};

/// All optimization variables. Scales are stored as logarithms so they stay
/// positive.
struct ParameterBlock {
  std::vector<RigidTransform> poses;      // per view: camera-to-world T^W_C
  std::vector<double> log_sigma;          // per view depth scale
  std::vector<Intrinsics> intrinsics;     // per camera
  std::vector<double> log_lambda;         // per camera metric scale
  std::vector<RigidTransform> extrinsics; // per camera: X_j = T^R_{C_j}

  [[nodiscard]] double sigma(int view) const;
  [[nodiscard]] double lambda(int camera) const;
  [[nodiscard]] int view_count() const { return static_cast<int>(poses.size()); }
  [[nodiscard]] int camera_count() const { return static_cast<int>(intrinsics.size()); }
};

/// Everything the losses read besides the parameters.
struct CalibrationProblem {
  std::vector<ViewRecord> views;  // view id == index
  SceneGraph graph;
  RobotTrajectory trajectory;
  int camera_count{1};
};

struct LossWeights {
  double w3d{1.0};
  double w2d{1.0};
  double wcal{1.0};
  double wcross{1.0};
  /// Split weighting of the 4x4 Frobenius residuals.
  double w_rot{1.0};
  double w_trans{1.0};
  bool cross_enabled{true};
  /// Huber smoothing of the scene residual norms (unit slope for large residuals).
  bool robust{false};
  double huber_3d{0.1};  // world units
  double huber_2d{2.0};  // pixels
};

struct LossReport {
  std::vector<double> l3d;   // per camera
  std::vector<double> l2d;   // per camera
  std::vector<double> lcal;  // per camera
  std::map<std::pair<int, int>, double> lcross;
  LossWeights weights;
  double total{0.0};
  size_t residuals_3d{0};
  size_t residuals_2d{0};
  size_t dropped_2d{0};
  size_t cal_terms{0};
  size_t cross_terms{0};

  /// Recomputes the weighted sum of the stored terms.
  [[nodiscard]] double sum_of_terms() const;
};

/// Gradient in the tangent space of ParameterBlock: left-increment (omega, v)
/// for poses and extrinsics, d/d(log) for scales, raw (fx, fy, cx, cy).
struct Gradient {
  std::vector<Vec6> poses;
  std::vector<double> log_sigma;
  std::vector<Vec4> intrinsics;
  std::vector<double> log_lambda;
  std::vector<Vec6> extrinsics;

  static Gradient zeros(int views, int cameras);
  [[nodiscard]] size_t dimension() const;
  [[nodiscard]] Eigen::VectorXd flatten() const;
  [[nodiscard]] double norm() const { return flatten().norm(); }
};

/// Number of scalar coordinates of the tangent space for `params`.
size_t tangent_dimension(const ParameterBlock& params);
/// Moves coordinate `index` (flatten() order) of `params` by `step`.
void apply_coordinate_step(ParameterBlock& params, size_t index, double step);

/// Gauss-Newton system of the iteratively reweighted loss: every residual
/// vector r with norm s enters with weight rho'(s)/s, so `gradient` is the
/// exact loss gradient and `hessian` its reweighted Gauss-Newton
/// approximation (flatten() coordinate order).
struct NormalEquations {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  double loss{0.0};
};

/// Evaluates the unified loss and its exact gradient. Construction validates
/// the problem and caches the canonical depth of every match endpoint.
class LossEngine {
 public:
  /// Scene residuals of different edges are evaluated on up to `threads`
  /// workers and reduced in edge order: results do not depend on `threads`.
  explicit LossEngine(const CalibrationProblem& problem, int threads = 1);

  [[nodiscard]] const CalibrationProblem& problem() const { return *problem_; }

  /// Camera that owns an edge's scene residuals: the camera of its lower view id.
  [[nodiscard]] int edge_owner(size_t edge) const;
  /// Views of `camera`, sorted by pose index.
  [[nodiscard]] const std::vector<int>& camera_views(int camera) const { return camera_views_[camera]; }
  /// Unordered camera pairs with >= 2 common pose indices.
  [[nodiscard]] std::vector<std::pair<int, int>> cross_pairs() const;

  double loss_3d(const ParameterBlock& params, int camera, const LossWeights& w = {}) const;
  double loss_2d(const ParameterBlock& params, int camera, const LossWeights& w = {}) const;
  double loss_cal(const ParameterBlock& params, int camera, const LossWeights& w = {}) const;
  double loss_cross(const ParameterBlock& params, int camera_n, int camera_m,
                    const LossWeights& w = {}) const;

  LossReport total_loss(const ParameterBlock& params, const LossWeights& w = {}) const;
  /// Loss report and gradient of the weighted total.
  LossReport gradient(const ParameterBlock& params, const LossWeights& w, Gradient& grad) const;
  /// Residual norms below `min_norm` are weighted as if they were `min_norm`.
  NormalEquations linearize(const ParameterBlock& params, const LossWeights& w,
                            double min_norm = 1e-10) const;

 private:
  struct PreparedMatch {
    Vec2 pixel_n;
    Vec2 pixel_m;
    double weight;
    double depth_n;
    double depth_m;
  };
  struct PreparedEdge {
    int view_n;
    int view_m;
    int owner;
    std::vector<PreparedMatch> matches;
  };

  void check_params(const ParameterBlock& params) const;
  void scene_terms(const ParameterBlock& params, const LossWeights& w, LossReport& report,
                   Gradient* grad, int only_camera, bool want_3d, bool want_2d) const;
  double cal_term(const ParameterBlock& params, int camera, const LossWeights& w, Gradient* grad,
                  double scale, size_t* terms) const;
  double cross_term(const ParameterBlock& params, int n, int m, const LossWeights& w,
                    Gradient* grad, double scale, size_t* terms) const;
  LossReport evaluate(const ParameterBlock& params, const LossWeights& w, Gradient* grad) const;

  const CalibrationProblem* problem_;
  int threads_{1};
  std::vector<PreparedEdge> edges_;
  std::vector<std::vector<int>> camera_views_;
};

// Free-function forms.
double loss_3d(const LossEngine& engine, const ParameterBlock& params, int camera);
double loss_2d(const LossEngine& engine, const ParameterBlock& params, int camera);
double loss_cal(const LossEngine& engine, const ParameterBlock& params, int camera);
double loss_cross(const LossEngine& engine, const ParameterBlock& params, int camera_n, int camera_m);
LossReport total_loss(const LossEngine& engine, const ParameterBlock& params,
                      const LossWeights& weights = {});

}  // namespace rigrecon
