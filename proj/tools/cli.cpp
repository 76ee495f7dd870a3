#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "config.hpp"
#include "rigrecon/error.hpp"
#include "rigrecon/evaluation.hpp"
#include "rigrecon/io.hpp"
#include "rigrecon/problem.hpp"

namespace rigrecon::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kNumerical = 2;

struct SolveFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool freeze_intrinsics{false};
  bool no_cross_loss{false};
  std::string weights;
};

void add_solve_flags(CLI::App* app, SolveFlags& f) {
  app->add_option("--config", f.config, "solver configuration (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "seed of the randomized initialization and plane fit");
  app->add_option("--threads", f.threads, "worker threads (results do not depend on it)");
  app->add_flag("--freeze-intrinsics", f.freeze_intrinsics, "keep the initial intrinsics fixed");
  app->add_flag("--no-cross-loss", f.no_cross_loss, "disable the cross-camera consistency term");
  app->add_option("--weights", f.weights, "w3d,w2d,wcal,wcross");
}

SolveConfig make_solve_config(const SolveFlags& f) {
  SolveConfig c = f.config.empty() ? SolveConfig{} : solve_from_json(load_json(f.config));
  if (f.seed) {
    c.init.seed = *f.seed;
    c.ground.seed = *f.seed + 1;
  }
  if (f.threads) {
    if (*f.threads < 1) throw Error(ErrorCode::InvalidConfig, "--threads must be at least 1");
    c.threads = *f.threads;
  }
  if (f.freeze_intrinsics) c.optimizer.freeze_intrinsics = true;
  if (f.no_cross_loss) c.weights.cross_enabled = false;
  if (!f.weights.empty()) {
    std::vector<double> w;
    std::stringstream ss(f.weights);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != item.size() || !std::isfinite(v) || v < 0.0) {
        throw Error(ErrorCode::InvalidConfig, "--weights expects four non-negative numbers, got '" + f.weights + "'");
      }
      w.push_back(v);
    }
    if (w.size() != 4) {
      throw Error(ErrorCode::InvalidConfig, "--weights expects four non-negative numbers, got '" + f.weights + "'");
    }
    c.weights.w3d = w[0];
    c.weights.w2d = w[1];
    c.weights.wcal = w[2];
    c.weights.wcross = w[3];
  }
  return c;
}

CalibrationResult truth_result(const Scenario& s) {
  CalibrationResult r;
  for (size_t j = 0; j < s.truth.extrinsics.size(); ++j) {
    CameraResult c;
    c.extrinsics = s.truth.extrinsics[j];
    c.lambda = s.truth.lambda[j];
    c.intrinsics = s.truth.intrinsics[j];
    r.cameras.push_back(c);
  }
  for (const auto& v : s.archive.views) {
    r.views.push_back({v.id, v.camera, v.pose_index, s.truth.view_poses[v.id], 1.0});
  }
  r.trajectory = s.truth.trajectory;
  return r;
}

std::vector<RigidTransform> extrinsics_of(const CalibrationResult& r) {
  std::vector<RigidTransform> xs;
  for (const auto& c : r.cameras) xs.push_back(c.extrinsics);
  return xs;
}

void print_summary(std::ostream& out, const CalibrationResult& r) {
  out << std::setprecision(6);
  for (size_t j = 0; j < r.cameras.size(); ++j) {
    const CameraResult& c = r.cameras[j];
    const Vec3& t = c.extrinsics.translation;
    const Vec3 w = c.extrinsics.rotation.log();
    out << "camera " << j << ": t = [" << t.x() << ", " << t.y() << ", " << t.z() << "] m, r = [" << w.x() << ", "
        << w.y() << ", " << w.z() << "] rad, lambda = " << c.lambda << ", fx = " << c.intrinsics.fx
        << ", fy = " << c.intrinsics.fy << "\n";
    if (c.z_unobservable) {
      out << "  translation along [" << c.unobservable_axis.transpose() << "] unobservable from motion";
      if (c.recovered_z) {
        out << "; recovered from the ground plane: " << c.recovered_z->mean << " m (std " << c.recovered_z->stddev
            << ")";
      }
      out << "\n";
    }
    if (c.handeye_fallback) out << "  closed-form hand-eye failed, started from identity\n";
    if (c.lambda_fallback) out << "  lambda could not be initialized, started from 1\n";
  }
  out << "loss " << r.log.initial_loss << " -> " << r.log.final_loss << " after " << r.log.iterations << " + "
      << r.log.refine_iterations << " iterations (" << r.log.stop_reason << ")\n";
}

void print_errors(std::ostream& out, const CalibrationResult& r, const CalibrationResult& truth) {
  const CalibErrors e = calib_errors(extrinsics_of(r), extrinsics_of(truth));
  out << std::setprecision(6) << "e_t = " << e.translation << " m, e_theta = " << e.rotation << " rad\n";
  for (size_t j = 0; j < r.cameras.size() && j < truth.cameras.size(); ++j) {
    out << "camera " << j << ": lambda/lambda* - 1 = " << r.cameras[j].lambda / truth.cameras[j].lambda - 1.0
        << "\n";
  }
}

fs::path cloud_path_for(const std::string& explicit_path, const fs::path& result_path) {
  if (!explicit_path.empty()) return explicit_path;
  fs::path p = result_path;
  p.replace_extension(".ply");
  return p;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint camera-to-robot calibration and metric reconstruction"};
  app.name("rigrecon");
  app.require_subcommand(1);

  // simulate
  std::string sim_config;
  std::string sim_preset;
  std::optional<std::uint64_t> sim_seed;
  std::string sim_out;
  CLI::App* simulate = app.add_subcommand("simulate", "render a synthetic scene into an archive");
  simulate->add_option("--config", sim_config, "scenario configuration (JSON)")->check(CLI::ExistingFile);
  simulate->add_option("--preset", sim_preset, "franka-like or memroc-like");
  simulate->add_option("--seed", sim_seed, "scenario seed");
  simulate->add_option("--out", sim_out, "output directory")->required();

  // calibrate
  std::string archive_dir;
  std::string trajectory_file;
  std::string result_file;
  std::string cloud_file;
  std::string truth_file;
  SolveFlags cal_flags;
  CLI::App* calibrate = app.add_subcommand("calibrate", "solve extrinsics, scales and the metric cloud");
  calibrate->add_option("--archive", archive_dir, "archive directory")->required();
  calibrate->add_option("--trajectory", trajectory_file, "robot pose file")->required();
  calibrate->add_option("--out", result_file, "result file")->required();
  calibrate->add_option("--cloud", cloud_file, "point cloud file (default: result path with .ply)");
  calibrate->add_option("--truth", truth_file, "ground truth in result format, for error reporting");
  add_solve_flags(calibrate, cal_flags);

  // evaluate
  std::string eval_result;
  std::string eval_truth;
  std::string eval_archive;
  CLI::App* evaluate = app.add_subcommand("evaluate", "calibration errors and checkerboard scale accuracy");
  evaluate->add_option("--result", eval_result, "result file")->required();
  evaluate->add_option("--truth", eval_truth, "ground truth in result format");
  evaluate->add_option("--archive", eval_archive, "archive with corner detections, for scale accuracy");

  // baseline
  std::string base_archive;
  std::string base_trajectory;
  std::string base_out;
  std::string base_truth;
  SolveFlags base_flags;
  CLI::App* baseline = app.add_subcommand("baseline", "classical closed-form hand-eye on the same inputs");
  baseline->add_option("--archive", base_archive, "archive directory")->required();
  baseline->add_option("--trajectory", base_trajectory, "robot pose file")->required();
  baseline->add_option("--out", base_out, "result file");
  baseline->add_option("--truth", base_truth, "ground truth in result format");
  add_solve_flags(baseline, base_flags);

  // export-cloud
  std::string exp_result;
  std::string exp_archive;
  std::string exp_out;
  CLI::App* export_cmd = app.add_subcommand("export-cloud", "write the metric point cloud of a result");
  export_cmd->add_option("--result", exp_result, "result file")->required();
  export_cmd->add_option("--archive", exp_archive, "archive the result was solved from")->required();
  export_cmd->add_option("--out", exp_out, "point cloud file (.ply)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and friends report success with an exit code of 0.
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (simulate->parsed()) {
      ScenarioConfig cfg = sim_config.empty() ? ScenarioConfig{} : scenario_from_json(load_json(sim_config));
      if (!sim_preset.empty()) {
        if (!sim_config.empty()) throw Error(ErrorCode::InvalidConfig, "use either --preset or --config");
        cfg = preset(sim_preset);
      }
      if (sim_seed) cfg.seed = *sim_seed;
      const Scenario s = generate(cfg);
      const fs::path dir = sim_out;
      write_archive(dir / "archive", s.archive);
      write_trajectory(dir / "trajectory.txt", s.trajectory);
      write_result(dir / "truth.txt", truth_result(s));
      out << "wrote " << s.archive.views.size() << " views, " << s.trajectory.size() << " poses to " << dir.string()
          << "\n";
      return kOk;
    }

    if (calibrate->parsed()) {
      const SolveConfig cfg = make_solve_config(cal_flags);
      const Archive archive = read_archive(archive_dir);
      std::vector<std::string> warnings;
      const RobotTrajectory traj = read_trajectory(trajectory_file, &warnings);
      CalibrationResult r = solve(archive, traj, cfg);
      r.warnings.insert(r.warnings.begin(), warnings.begin(), warnings.end());
      write_result(result_file, r);
      const fs::path cloud = cloud_path_for(cloud_file, result_file);
      export_cloud(r, cloud);
      for (const auto& w : r.warnings) err << "warning: " << w << "\n";
      print_summary(out, r);
      if (!truth_file.empty()) print_errors(out, r, read_result(truth_file));
      out << "result: " << result_file << ", cloud: " << cloud.string() << " (" << r.cloud.size() << " points)\n";
      return kOk;
    }

    if (evaluate->parsed()) {
      const CalibrationResult r = read_result(eval_result);
      if (eval_truth.empty() && eval_archive.empty()) {
        throw Error(ErrorCode::InvalidArgument, "evaluate needs --truth, --archive or both");
      }
      if (!eval_truth.empty()) print_errors(out, r, read_result(eval_truth));
      if (!eval_archive.empty()) {
        const Archive archive = read_archive(eval_archive);
        if (!archive.board) throw Error(ErrorCode::NoDetections, "archive declares no checkerboard");
        const ScaleAccuracy a = scale_accuracy(lift_corners(archive, r), *archive.board);
        out << std::setprecision(6) << "checkerboard: m_s = " << a.mean_square << " m, sigma_s = " << a.stddev
            << " m, delta_s = " << a.relative_error << " % over " << a.detections << " detections\n";
      }
      return kOk;
    }

    if (baseline->parsed()) {
      const SolveConfig cfg = make_solve_config(base_flags);
      const Archive archive = read_archive(base_archive);
      const RobotTrajectory traj = read_trajectory(base_trajectory);
      const CalibrationProblem problem = make_problem(archive, traj, cfg.graph);
      const Initialization init = initialize(problem, cfg.init);
      CalibrationResult r = assemble_result(problem, init, init.params);
      r.log.stop_reason = "closed form";
      for (const auto& w : r.warnings) err << "warning: " << w << "\n";
      print_summary(out, r);
      if (!base_truth.empty()) print_errors(out, r, read_result(base_truth));
      if (!base_out.empty()) write_result(base_out, r);
      return kOk;
    }

    if (export_cmd->parsed()) {
      CalibrationResult r = read_result(exp_result);
      rebuild_cloud(read_archive(exp_archive), r);
      export_cloud(r, exp_out);
      out << "wrote " << r.cloud.size() << " points to " << exp_out << "\n";
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_numerical(e.code()) ? kNumerical : kInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kInvalid;
}

}  // namespace rigrecon::cli
