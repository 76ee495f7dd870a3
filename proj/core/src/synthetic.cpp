#include "rigrecon/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <numbers>
#include <random>
#include <string>

#include "rigrecon/error.hpp"

namespace rigrecon {

namespace {

using Rng = std::mt19937_64;
constexpr double kPi = std::numbers::pi;
constexpr double kNearClip = 0.05;

double uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

double gauss(Rng& rng, double stddev) {
  return stddev > 0.0 ? std::normal_distribution<double>(0.0, stddev)(rng) : 0.0;
}

Vec3 gauss3(Rng& rng, double stddev) { return {gauss(rng, stddev), gauss(rng, stddev), gauss(rng, stddev)}; }

struct ScenePoint {
  Vec3 p;
  bool floor{false};
  int corner{-1};
};

/// Camera looking along `forward` (z), x to the right of `up`, y down.
Rotation look_rotation(const Vec3& forward, const Vec3& up) {
  const Vec3 z = forward.normalized();
  const Vec3 x = z.cross(up).normalized();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return Rotation::from_matrix(r);
}

/// Points on the top and the four sides of an axis-aligned box standing on z = 0.
void add_box(std::vector<ScenePoint>& out, const Vec3& center, const Vec3& size, int count, Rng& rng) {
  const double top = size.x() * size.y();
  const double side_x = size.y() * size.z();
  const double side_y = size.x() * size.z();
  const double total = top + 2.0 * side_x + 2.0 * side_y;
  for (int k = 0; k < count; ++k) {
    const double pick = uniform(rng, 0.0, total);
    Vec3 local(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5));
    if (pick < top) {
      local.z() = 0.5;
    } else if (pick < top + 2.0 * side_x) {
      local.x() = pick < top + side_x ? -0.5 : 0.5;
    } else {
      local.y() = pick < top + 2.0 * side_x + side_y ? -0.5 : 0.5;
    }
    out.push_back({center + local.cwiseProduct(size), false, -1});
  }
}

void add_board(std::vector<ScenePoint>& out, const CheckerboardSpec& board, const Vec3& origin,
               const Vec3& row_dir, const Vec3& col_dir) {
  for (int r = 0; r < board.rows; ++r) {
    for (int c = 0; c < board.cols; ++c) {
      const double dr = (r - 0.5 * (board.rows - 1)) * board.square;
      const double dc = (c - 0.5 * (board.cols - 1)) * board.square;
      out.push_back({origin + dr * row_dir + dc * col_dir, false, r * board.cols + c});
    }
  }
}

struct Layout {
  std::vector<ScenePoint> points;           // base frame
  std::vector<RigidTransform> robot;        // T^B_{R_i}
  std::vector<RigidTransform> extrinsics;   // X_j
};

Layout arm_layout(const ScenarioConfig& cfg, Rng& rng) {
  Layout out;
  const Vec3 board_center(0.55, 0.0, 0.0);
  double hx = 0.0;
  double hy = 0.0;
  if (cfg.board) {
    hx = (0.5 * (cfg.board->rows - 1) + 1.5) * cfg.board->square;
    hy = (0.5 * (cfg.board->cols - 1) + 1.5) * cfg.board->square;
    add_board(out.points, *cfg.board, board_center, Vec3::UnitX(), Vec3::UnitY());
  }
  auto on_board = [&](double x, double y, double margin) {
    return std::abs(x - board_center.x()) < hx + margin && std::abs(y - board_center.y()) < hy + margin;
  };

  const int table_count = cfg.scene_points * 11 / 20;
  while (static_cast<int>(out.points.size()) < table_count + (cfg.board ? cfg.board->corner_count() : 0)) {
    const double x = uniform(rng, 0.15, 0.95);
    const double y = uniform(rng, -0.45, 0.45);
    if (cfg.board && on_board(x, y, 0.0)) continue;
    out.points.push_back({Vec3(x, y, 0.0), true, -1});
  }
  const int boxes = 4;
  const int per_box = (cfg.scene_points - table_count) / boxes;
  for (int b = 0; b < boxes; ++b) {
    Vec3 size(uniform(rng, 0.06, 0.14), uniform(rng, 0.06, 0.14), uniform(rng, 0.04, 0.12));
    Vec3 center;
    do {
      center = Vec3(uniform(rng, 0.2, 0.9), uniform(rng, -0.4, 0.4), 0.5 * size.z());
    } while (cfg.board && on_board(center.x(), center.y(), 0.5 * size.head<2>().maxCoeff() + 0.02));
    add_box(out.points, center, size, per_box, rng);
  }

  const RigidTransform x0{Rotation::from_axis_angle(Vec3(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3),
                                                          uniform(rng, -0.3, 0.3))),
                          Vec3(uniform(rng, -0.08, 0.08), uniform(rng, -0.08, 0.08), uniform(rng, 0.03, 0.1))};
  out.extrinsics.push_back(x0);
  for (int j = 1; j < cfg.cameras; ++j) {
    const RigidTransform offset{Rotation::from_axis_angle(Vec3(0.0, uniform(rng, -0.15, 0.15), 0.0)),
                                Vec3(0.05 * j, uniform(rng, -0.02, 0.02), 0.0)};
    out.extrinsics.push_back(x0 * offset);
  }

  for (int i = 0; i < cfg.poses; ++i) {
    const Vec3 target = board_center + Vec3(uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), 0.0);
    const double dist = uniform(rng, 0.45, 0.65);
    const double elev = uniform(rng, 45.0, 80.0) * kPi / 180.0;
    const double azim = uniform(rng, -kPi, kPi);
    const Vec3 center =
        target + dist * Vec3(std::cos(elev) * std::cos(azim), std::cos(elev) * std::sin(azim), std::sin(elev));
    const Rotation r = look_rotation(target - center, Vec3::UnitZ()) * Rotation::about_z(uniform(rng, -0.35, 0.35));
    out.robot.push_back(RigidTransform{r, center} * x0.inverse());
  }
  return out;
}

Layout mobile_layout(const ScenarioConfig& cfg, Rng& rng) {
  Layout out;
  const double board_angle = 0.3;
  if (cfg.board) {
    const Vec3 radial(std::cos(board_angle), std::sin(board_angle), 0.0);
    const Vec3 tangent(-radial.y(), radial.x(), 0.0);
    const double half_height = 0.5 * (cfg.board->rows - 1) * cfg.board->square;
    add_board(out.points, *cfg.board, 1.9 * radial + Vec3(0.0, 0.0, 0.15 + half_height), -Vec3::UnitZ(),
              tangent);
  }
  const int floor_count = cfg.scene_points / 2;
  for (int k = 0; k < floor_count; ++k) {
    const double r = 3.0 * std::sqrt(uniform(rng, 0.0, 1.0));
    const double a = uniform(rng, -kPi, kPi);
    out.points.push_back({Vec3(r * std::cos(a), r * std::sin(a), 0.0), true, -1});
  }
  const int boxes = 6;
  const int per_box = (cfg.scene_points - floor_count) / boxes;
  for (int b = 0; b < boxes; ++b) {
    double a = 0.0;
    do {
      a = board_angle + 2.0 * kPi * (b + 0.5) / boxes + uniform(rng, -0.3, 0.3);
    } while (cfg.board && std::abs(std::remainder(a - board_angle, 2.0 * kPi)) < 0.6);
    const double r = uniform(rng, 1.4, 2.6);
    const Vec3 size(uniform(rng, 0.3, 0.6), uniform(rng, 0.3, 0.6), uniform(rng, 0.3, 0.8));
    add_box(out.points, Vec3(r * std::cos(a), r * std::sin(a), 0.5 * size.z()), size, per_box, rng);
  }

  for (int j = 0; j < cfg.cameras; ++j) {
    double yaw = 0.0;
    if (cfg.cameras == 3) {
      yaw = std::array<double, 3>{0.0, 0.5 * kPi, -0.5 * kPi}[j];
    } else {
      yaw = 2.0 * kPi * j / cfg.cameras;
    }
    yaw += uniform(rng, -0.05, 0.05);
    const double pitch = (20.0 + 3.0 * j) * kPi / 180.0 + uniform(rng, -0.02, 0.02);
    const double height = 0.45 + 0.05 * (j % 3) + uniform(rng, -0.01, 0.01);
    const Vec3 forward(std::cos(yaw) * std::cos(pitch), std::sin(yaw) * std::cos(pitch), -std::sin(pitch));
    const Rotation r = look_rotation(forward, Vec3::UnitZ()) * Rotation::about_z(uniform(rng, -0.03, 0.03));
    out.extrinsics.push_back({r, Vec3(0.15 * std::cos(yaw), 0.15 * std::sin(yaw), height)});
  }

  const double start = uniform(rng, -kPi, kPi);
  for (int i = 0; i < cfg.poses; ++i) {
    const double yaw = start + 2.0 * kPi * i / cfg.poses + gauss(rng, 0.15);
    const double r = 0.35 * std::sqrt(uniform(rng, 0.0, 1.0));
    const double a = uniform(rng, -kPi, kPi);
    out.robot.push_back({Rotation::about_z(yaw), Vec3(r * std::cos(a), r * std::sin(a), 0.0)});
  }
  return out;
}

struct Rendered {
  std::vector<int> cell_point;            // point id per cell, -1 when empty
  std::map<int, Vec2> visible;            // point id -> exact pixel
  std::vector<Vec3> camera_points;        // per cell, camera frame
};

Rendered render(const std::vector<ScenePoint>& points, const RigidTransform& camera_to_base,
                const Intrinsics& k) {
  Rendered out;
  const size_t cells = static_cast<size_t>(k.width) * k.height;
  out.cell_point.assign(cells, -1);
  out.camera_points.assign(cells, Vec3::Zero());
  std::vector<double> zbuf(cells, std::numeric_limits<double>::infinity());
  std::vector<Vec2> pixel(cells);
  const RigidTransform base_to_camera = camera_to_base.inverse();
  for (size_t id = 0; id < points.size(); ++id) {
    const Vec3 pc = base_to_camera * points[id].p;
    if (pc.z() < kNearClip) continue;
    const Vec2 px = project(pc, k);
    const double cx = std::floor(px.x() + 0.5);
    const double cy = std::floor(px.y() + 0.5);
    if (cx < 0.0 || cy < 0.0 || cx >= k.width || cy >= k.height) continue;
    const size_t cell = static_cast<size_t>(cy) * k.width + static_cast<size_t>(cx);
    if (pc.z() < zbuf[cell]) {
      zbuf[cell] = pc.z();
      out.cell_point[cell] = static_cast<int>(id);
      out.camera_points[cell] = pc;
      pixel[cell] = px;
    }
  }
  for (size_t c = 0; c < cells; ++c) {
    if (out.cell_point[c] >= 0) out.visible.emplace(out.cell_point[c], pixel[c]);
  }
  return out;
}

}  // namespace

double ScenarioConfig::lambda_of(int camera) const {
  return lambda.size() == 1 ? lambda.front() : lambda.at(camera);
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (cameras < 1) fail("cameras must be >= 1");
  if (poses < 2) fail("poses must be >= 2");
  if (scene_points < 1) fail("scene_points must be >= 1");
  if (!(depth_noise >= 0.0) || !(pose_jitter >= 0.0)) fail("noise parameters must be >= 0");
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) fail("outlier_fraction must be in [0, 1]");
  if (lambda.size() != 1 && static_cast<int>(lambda.size()) != cameras) {
    fail("lambda needs one entry or one per camera");
  }
  for (double l : lambda) {
    if (!(l > 0.0) || !std::isfinite(l)) fail("lambda must be > 0");
  }
  if (width < 8 || height < 8) fail("image must be at least 8x8");
  if (!(focal > 0.0)) fail("focal must be > 0");
  if (estimates_per_view < 1) fail("estimates_per_view must be >= 1");
  if (max_matches < 1 || min_shared < 1) fail("match limits must be >= 1");
  if (board) {
    try {
      board->validate();
    } catch (const Error& e) {
      fail(e.what());
    }
  }
}

Scenario generate(const ScenarioConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const Layout layout = config.mode == MotionMode::Arm ? arm_layout(config, rng) : mobile_layout(config, rng);
  const int cams = config.cameras;
  const int n_poses = config.poses;

  Scenario s;
  s.config = config;
  GroundTruth& truth = s.truth;
  truth.extrinsics = layout.extrinsics;
  const RigidTransform base_to_r0 = layout.robot.front().inverse();
  for (const auto& r : layout.robot) truth.trajectory.poses.push_back(base_to_r0 * r);
  truth.trajectory.poses.front() = RigidTransform::identity();
  for (const auto& p : layout.points) truth.scene_points.push_back(base_to_r0 * p.p);
  truth.floor_normal = base_to_r0.rotation * Vec3::UnitZ();
  truth.floor_offset = truth.floor_normal.dot(base_to_r0.translation);
  Intrinsics k{config.focal, config.focal, 0.5 * (config.width - 1), 0.5 * (config.height - 1), config.width,
               config.height};
  for (int j = 0; j < cams; ++j) {
    truth.lambda.push_back(config.lambda_of(j));
    truth.intrinsics.push_back(k);
  }

  // Views are pose-major: id = i * M + j.
  std::vector<Rendered> renders;
  Archive& archive = s.archive;
  for (int i = 0; i < n_poses; ++i) {
    for (int j = 0; j < cams; ++j) {
      const RigidTransform cam_to_base = layout.robot[i] * layout.extrinsics[j];
      truth.view_poses.push_back(base_to_r0 * cam_to_base);
      Rendered r = render(layout.points, cam_to_base, k);
      const double inv_lambda = 1.0 / config.lambda_of(j);

      ArchiveView v;
      v.id = i * cams + j;
      v.camera = j;
      v.pose_index = i;
      v.width = config.width;
      v.height = config.height;
      for (int e = 0; e < config.estimates_per_view; ++e) {
        Pointmap pm(config.width, config.height);
        for (size_t c = 0; c < pm.size(); ++c) {
          if (r.cell_point[c] < 0) continue;
          pm.points[c] = r.camera_points[c] * ((1.0 + gauss(rng, config.depth_noise)) * inv_lambda);
          pm.confidence[c] = 1.0;
        }
        v.estimates.push_back(std::move(pm));
      }
      if (config.ground_masks) {
        std::vector<std::uint8_t> mask(r.cell_point.size(), 0);
        for (size_t c = 0; c < mask.size(); ++c) {
          mask[c] = r.cell_point[c] >= 0 && layout.points[r.cell_point[c]].floor ? 1 : 0;
        }
        v.ground_mask = std::move(mask);
      }
      if (config.intrinsics_prior) v.intrinsics_prior = k;
      if (config.board) {
        std::vector<Vec2> corners(config.board->corner_count());
        int found = 0;
        for (const auto& [id, px] : r.visible) {
          const int c = layout.points[id].corner;
          if (c >= 0) {
            corners[c] = px;
            ++found;
          }
        }
        if (found == config.board->corner_count()) v.corners = std::move(corners);
      }
      archive.views.push_back(std::move(v));
      renders.push_back(std::move(r));
    }
  }

  const int n_views = static_cast<int>(archive.views.size());
  archive.scores = CovisibilityMatrix(n_views);
  if (config.board) archive.board = config.board;
  for (int a = 0; a < n_views; ++a) {
    for (int b = a + 1; b < n_views; ++b) {
      std::vector<int> shared;
      for (const auto& [id, px] : renders[a].visible) {
        if (renders[b].visible.count(id)) shared.push_back(id);
      }
      const size_t smaller = std::min(renders[a].visible.size(), renders[b].visible.size());
      if (static_cast<int>(shared.size()) < config.min_shared || smaller == 0) continue;
      archive.scores.set(a, b, static_cast<double>(shared.size()) / static_cast<double>(smaller));

      std::shuffle(shared.begin(), shared.end(), rng);
      shared.resize(std::min<size_t>(shared.size(), static_cast<size_t>(config.max_matches)));
      std::sort(shared.begin(), shared.end());
      MatchSet ms{a, b, {}};
      for (int id : shared) ms.pairs.push_back({renders[a].visible.at(id), renders[b].visible.at(id), 1.0});

      const auto outliers = static_cast<size_t>(std::llround(config.outlier_fraction * ms.pairs.size()));
      if (outliers > 0) {
        std::vector<size_t> order(ms.pairs.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<size_t> valid_cells;
        for (size_t c = 0; c < renders[b].cell_point.size(); ++c) {
          if (renders[b].cell_point[c] >= 0) valid_cells.push_back(c);
        }
        std::uniform_int_distribution<size_t> pick(0, valid_cells.size() - 1);
        for (size_t o = 0; o < outliers; ++o) {
          Match& m = ms.pairs[order[o]];
          const Vec2 original = m.pixel_m;
          for (int attempt = 0; attempt < 16 && (m.pixel_m - original).norm() < 2.0; ++attempt) {
            const size_t c = valid_cells[pick(rng)];
            m.pixel_m = Vec2(static_cast<double>(c % config.width), static_cast<double>(c / config.width));
          }
        }
      }
      archive.matches.push_back(std::move(ms));
    }
  }

  s.trajectory = truth.trajectory;
  if (config.pose_jitter > 0.0) {
    for (size_t i = 1; i < s.trajectory.poses.size(); ++i) {
      RigidTransform& p = s.trajectory.poses[i];
      if (config.mode == MotionMode::Mobile) {
        p.rotation = Rotation::about_z(gauss(rng, config.pose_jitter)) * p.rotation;
        p.translation += Vec3(gauss(rng, config.pose_jitter), gauss(rng, config.pose_jitter), 0.0);
      } else {
        p.rotation = Rotation::from_axis_angle(gauss3(rng, config.pose_jitter)) * p.rotation;
        p.translation += gauss3(rng, config.pose_jitter);
      }
    }
  }
  return s;
}

ScenarioConfig preset(std::string_view name) {
  ScenarioConfig c;
  if (name == "franka-like") {
    c.mode = MotionMode::Arm;
    c.cameras = 1;
    c.poses = 25;
    c.board = CheckerboardSpec{7, 10, 0.03};
    return c;
  }
  if (name == "memroc-like") {
    c.mode = MotionMode::Mobile;
    c.cameras = 3;
    c.poses = 25;
    c.board = CheckerboardSpec{7, 6, 0.10};
    c.scene_points = 3000;
    c.focal = 60.0;
    c.ground_masks = true;
    return c;
  }
  throw Error(ErrorCode::UnknownPreset, "unknown preset '" + std::string(name) + "'");
}

ParameterBlock ground_truth_parameters(const Scenario& scenario) {
  const GroundTruth& t = scenario.truth;
  ParameterBlock p;
  for (const auto& v : scenario.archive.views) {
    const double lambda = t.lambda[v.camera];
    RigidTransform pose = t.view_poses[v.id];
    pose.translation /= lambda;
    p.poses.push_back(pose);
    p.log_sigma.push_back(0.0);
  }
  for (size_t j = 0; j < t.extrinsics.size(); ++j) {
    p.intrinsics.push_back(t.intrinsics[j]);
    p.log_lambda.push_back(std::log(t.lambda[j]));
    p.extrinsics.push_back(t.extrinsics[j]);
  }
  return p;
}

Scenario truncate_poses(const Scenario& scenario, int poses) {
  if (poses < 2 || poses > static_cast<int>(scenario.trajectory.size())) {
    throw Error(ErrorCode::InvalidArgument, "pose count out of range");
  }
  Scenario out;
  out.config = scenario.config;
  out.config.poses = poses;
  std::vector<int> remap(scenario.archive.views.size(), -1);
  for (const auto& v : scenario.archive.views) {
    if (v.pose_index >= poses) continue;
    remap[v.id] = static_cast<int>(out.archive.views.size());
    ArchiveView copy = v;
    copy.id = remap[v.id];
    out.archive.views.push_back(std::move(copy));
    out.truth.view_poses.push_back(scenario.truth.view_poses[v.id]);
  }
  const int n = static_cast<int>(out.archive.views.size());
  out.archive.scores = CovisibilityMatrix(n);
  for (size_t a = 0; a < remap.size(); ++a) {
    for (size_t b = a + 1; b < remap.size(); ++b) {
      if (remap[a] >= 0 && remap[b] >= 0) {
        out.archive.scores.set(remap[a], remap[b], scenario.archive.scores(static_cast<int>(a), static_cast<int>(b)));
      }
    }
  }
  for (const auto& m : scenario.archive.matches) {
    if (remap[m.view_n] < 0 || remap[m.view_m] < 0) continue;
    MatchSet copy = m;
    copy.view_n = remap[m.view_n];
    copy.view_m = remap[m.view_m];
    out.archive.matches.push_back(std::move(copy));
  }
  out.archive.board = scenario.archive.board;
  out.truth.extrinsics = scenario.truth.extrinsics;
  out.truth.lambda = scenario.truth.lambda;
  out.truth.intrinsics = scenario.truth.intrinsics;
  out.truth.scene_points = scenario.truth.scene_points;
  out.truth.floor_normal = scenario.truth.floor_normal;
  out.truth.floor_offset = scenario.truth.floor_offset;
  out.truth.trajectory.poses.assign(scenario.truth.trajectory.poses.begin(),
                                    scenario.truth.trajectory.poses.begin() + poses);
  out.trajectory.poses.assign(scenario.trajectory.poses.begin(), scenario.trajectory.poses.begin() + poses);
  return out;
}

}  // namespace rigrecon
