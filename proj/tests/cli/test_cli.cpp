#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "config.hpp"
#include "rigrecon/error.hpp"
#include "rigrecon/io.hpp"

using namespace rigrecon;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code{0};
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "rigrecon");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "rigrecon_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::trunc);
  f << text;
}

/// A small single-camera scene with a board, simulated into `dir`.
fs::path simulated(const std::string& name) {
  const fs::path dir = scratch(name);
  write_text(dir / "scene.json", R"({"preset": "franka-like", "poses": 6, "scene_points": 600,
                                     "width": 64, "height": 48, "focal": 56.0, "max_matches": 40})");
  const Outcome r = run({"simulate", "--config", (dir / "scene.json").string(), "--seed", "3", "--out",
                     (dir / "sim").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  return dir / "sim";
}

}  // namespace

TEST(Cli, SimulateCalibrateEvaluate) {
  const fs::path sim = simulated("pipeline");
  ASSERT_TRUE(fs::exists(sim / "archive" / "manifest.txt"));
  ASSERT_TRUE(fs::exists(sim / "trajectory.txt"));
  ASSERT_TRUE(fs::exists(sim / "truth.txt"));

  const fs::path result = sim / "result.txt";
  Outcome r = run({"calibrate", "--archive", (sim / "archive").string(), "--trajectory", (sim / "trajectory.txt").string(),
               "--out", result.string(), "--truth", (sim / "truth.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("e_t = "), std::string::npos);
  ASSERT_TRUE(fs::exists(result));
  ASSERT_TRUE(fs::exists(sim / "result.ply"));

  r = run({"evaluate", "--result", result.string(), "--truth", (sim / "truth.txt").string(), "--archive",
           (sim / "archive").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("checkerboard: m_s"), std::string::npos);

  const CalibrationResult solved = read_result(result);
  const CalibrationResult truth = read_result(sim / "truth.txt");
  EXPECT_LE((solved.cameras[0].extrinsics.translation - truth.cameras[0].extrinsics.translation).norm(), 1e-4);

  // export-cloud rebuilds the same file calibrate wrote.
  r = run({"export-cloud", "--result", result.string(), "--archive", (sim / "archive").string(), "--out",
           (sim / "again.ply").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream a(sim / "result.ply", std::ios::binary);
  std::ifstream b(sim / "again.ply", std::ios::binary);
  EXPECT_TRUE(std::equal(std::istreambuf_iterator<char>(a), {}, std::istreambuf_iterator<char>(b), {}));
}

TEST(Cli, Baseline) {
  const fs::path sim = simulated("baseline");
  const Outcome r = run({"baseline", "--archive", (sim / "archive").string(), "--trajectory",
                     (sim / "trajectory.txt").string(), "--out", (sim / "base.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_result(sim / "base.txt").log.stop_reason, "closed form");
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"calibrate", "--archive", "x"}).code, 1);
  EXPECT_EQ(run({"simulate", "--preset", "bogus", "--out", scratch("bogus").string()}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, MismatchedTrajectoryExitsOne) {
  const fs::path sim = simulated("mismatch");
  // Drop the last pose.
  std::ifstream in(sim / "trajectory.txt");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  lines.pop_back();
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_text(sim / "short.txt", text);
  const Outcome r = run({"calibrate", "--archive", (sim / "archive").string(), "--trajectory", (sim / "short.txt").string(),
                     "--out", (sim / "r.txt").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("PoseIndexMismatch"), std::string::npos) << r.err;
}

TEST(Cli, BadWeightsExitOne) {
  const fs::path sim = simulated("weights");
  for (const std::string w : {"1,2,3", "1,a,1,1", "1,-1,1,1"}) {
    const Outcome r = run({"calibrate", "--archive", (sim / "archive").string(), "--trajectory",
                       (sim / "trajectory.txt").string(), "--out", (sim / "r.txt").string(), "--weights", w});
    EXPECT_EQ(r.code, 1) << w << ": " << r.err;
  }
}

TEST(Cli, CorruptArchiveExitsOne) {
  const fs::path sim = simulated("corrupt");
  fs::resize_file(sim / "archive" / "view0_points0.bin", 10);
  const Outcome r = run({"calibrate", "--archive", (sim / "archive").string(), "--trajectory",
                     (sim / "trajectory.txt").string(), "--out", (sim / "r.txt").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("CorruptBinary"), std::string::npos) << r.err;
}

TEST(Config, ScenarioJsonRoundTrip) {
  ScenarioConfig c = preset("memroc-like");
  c.depth_noise = 0.01;
  c.lambda = {1.5, 2.0, 2.5};
  c.seed = 42;
  const ScenarioConfig back = cli::scenario_from_json(cli::scenario_to_json(c));
  EXPECT_EQ(back.mode, MotionMode::Mobile);
  EXPECT_EQ(back.cameras, 3);
  EXPECT_EQ(back.lambda, c.lambda);
  EXPECT_EQ(back.depth_noise, 0.01);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(cli::scenario_to_json(back), cli::scenario_to_json(c));
}

TEST(Config, SolveJsonRoundTrip) {
  SolveConfig c;
  c.optimizer.max_iterations = 123;
  c.weights.robust = true;
  c.weights.wcross = 0.5;
  c.graph.anchors = 7;
  c.threads = 2;
  const SolveConfig back = cli::solve_from_json(cli::solve_to_json(c));
  EXPECT_EQ(back.optimizer.max_iterations, 123);
  EXPECT_TRUE(back.weights.robust);
  EXPECT_EQ(back.weights.wcross, 0.5);
  EXPECT_EQ(back.graph.anchors, 7);
  EXPECT_EQ(back.threads, 2);
  EXPECT_EQ(cli::solve_to_json(back), cli::solve_to_json(c));
}

TEST(Config, UnknownKeysAreRejected) {
  auto expect_invalid = [](const auto& fn) {
    try {
      fn();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidConfig) << e.what();
    }
  };
  expect_invalid([] { cli::scenario_from_json(nlohmann::json::parse(R"({"posess": 3})")); });
  expect_invalid([] { cli::scenario_from_json(nlohmann::json::parse(R"({"mode": "hover"})")); });
  expect_invalid([] { cli::solve_from_json(nlohmann::json::parse(R"({"optimizer": {"stepp": 1}})")); });
  expect_invalid([] { cli::solve_from_json(nlohmann::json::parse(R"({"threads": "many"})")); });
}
