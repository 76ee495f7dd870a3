#include "config.hpp"

#include <fstream>
#include <set>

#include "rigrecon/error.hpp"

namespace rigrecon::cli {

using nlohmann::json;

namespace {

/// Reads keys of one JSON object and complains about the ones nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(std::string("bad value for '") + key + "': " + e.what());
    }
  }

  [[nodiscard]] const json* section(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) fail("unknown key '" + key + "'");
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::InvalidConfig, where_ + ": " + what);
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read(const json& j, OptimizerConfig& c) {
  Fields f(j, "optimizer");
  f.get("max_iterations", c.max_iterations);
  f.get("step", c.step);
  f.get("pose_step", c.pose_step);
  f.get("scale_step", c.scale_step);
  f.get("intrinsics_step", c.intrinsics_step);
  f.get("extrinsics_step", c.extrinsics_step);
  f.get("tolerance", c.tolerance);
  f.get("window", c.window);
  f.get("warmup_fraction", c.warmup_fraction);
  f.get("ramp_fraction", c.ramp_fraction);
  f.get("freeze_intrinsics", c.freeze_intrinsics);
  f.get("refine_iterations", c.refine_iterations);
  f.get("refine_tolerance", c.refine_tolerance);
  f.finish();
}

void read(const json& j, LossWeights& w) {
  Fields f(j, "weights");
  f.get("w3d", w.w3d);
  f.get("w2d", w.w2d);
  f.get("wcal", w.wcal);
  f.get("wcross", w.wcross);
  f.get("w_rot", w.w_rot);
  f.get("w_trans", w.w_trans);
  f.get("cross_enabled", w.cross_enabled);
  f.get("robust", w.robust);
  f.get("huber_3d", w.huber_3d);
  f.get("huber_2d", w.huber_2d);
  f.finish();
}

void read(const json& j, GraphOptions& g) {
  Fields f(j, "graph");
  f.get("anchors", g.anchors);
  f.get("neighbors", g.neighbors);
  f.get("spanning_tree_repair", g.spanning_tree_repair);
  f.finish();
}

void read(const json& j, InitOptions& o) {
  Fields f(j, "init");
  f.get("ransac_iterations", o.ransac_iterations);
  f.get("ransac_threshold", o.ransac_threshold);
  f.get("observability_threshold", o.observability_threshold);
  f.get("seed", o.seed);
  f.finish();
}

void read(const json& j, PlaneFitOptions& o) {
  Fields f(j, "ground");
  f.get("iterations", o.iterations);
  f.get("inlier_threshold", o.inlier_threshold);
  f.get("min_consensus", o.min_consensus);
  f.get("seed", o.seed);
  f.finish();
}

}  // namespace

ScenarioConfig scenario_from_json(const json& j) {
  Fields f(j, "scenario");
  ScenarioConfig c;
  std::string name;
  f.get("preset", name);
  if (!name.empty()) c = preset(name);
  std::string mode = c.mode == MotionMode::Arm ? "arm" : "mobile";
  f.get("mode", mode);
  if (mode == "arm") {
    c.mode = MotionMode::Arm;
  } else if (mode == "mobile") {
    c.mode = MotionMode::Mobile;
  } else {
    f.fail("mode must be \"arm\" or \"mobile\"");
  }
  f.get("cameras", c.cameras);
  f.get("poses", c.poses);
  f.get("scene_points", c.scene_points);
  if (const json* b = f.section("board")) {
    if (b->is_null()) {
      c.board.reset();
    } else {
      Fields bf(*b, "scenario.board");
      CheckerboardSpec spec = c.board.value_or(CheckerboardSpec{});
      bf.get("rows", spec.rows);
      bf.get("cols", spec.cols);
      bf.get("square", spec.square);
      bf.finish();
      c.board = spec;
    }
  }
  f.get("depth_noise", c.depth_noise);
  f.get("outlier_fraction", c.outlier_fraction);
  f.get("pose_jitter", c.pose_jitter);
  if (const json* l = f.section("lambda")) {
    if (l->is_number()) {
      c.lambda = {l->get<double>()};
    } else {
      f.get("lambda", c.lambda);
    }
  }
  f.get("width", c.width);
  f.get("height", c.height);
  f.get("focal", c.focal);
  f.get("estimates_per_view", c.estimates_per_view);
  f.get("max_matches", c.max_matches);
  f.get("min_shared", c.min_shared);
  f.get("ground_masks", c.ground_masks);
  f.get("intrinsics_prior", c.intrinsics_prior);
  f.get("seed", c.seed);
  f.finish();
  c.validate();
  return c;
}

json scenario_to_json(const ScenarioConfig& c) {
  json j{{"mode", c.mode == MotionMode::Arm ? "arm" : "mobile"},
         {"cameras", c.cameras},
         {"poses", c.poses},
         {"scene_points", c.scene_points},
         {"depth_noise", c.depth_noise},
         {"outlier_fraction", c.outlier_fraction},
         {"pose_jitter", c.pose_jitter},
         {"lambda", c.lambda},
         {"width", c.width},
         {"height", c.height},
         {"focal", c.focal},
         {"estimates_per_view", c.estimates_per_view},
         {"max_matches", c.max_matches},
         {"min_shared", c.min_shared},
         {"ground_masks", c.ground_masks},
         {"intrinsics_prior", c.intrinsics_prior},
         {"seed", c.seed}};
  j["board"] = c.board ? json{{"rows", c.board->rows}, {"cols", c.board->cols}, {"square", c.board->square}}
                       : json(nullptr);
  return j;
}

SolveConfig solve_from_json(const json& j) {
  Fields f(j, "config");
  SolveConfig c;
  if (const json* s = f.section("optimizer")) read(*s, c.optimizer);
  if (const json* s = f.section("weights")) read(*s, c.weights);
  if (const json* s = f.section("graph")) read(*s, c.graph);
  if (const json* s = f.section("init")) read(*s, c.init);
  if (const json* s = f.section("ground")) read(*s, c.ground);
  f.get("unmasked_consensus", c.unmasked_consensus);
  f.get("threads", c.threads);
  f.finish();
  c.optimizer.validate();
  if (c.threads < 1) throw Error(ErrorCode::InvalidConfig, "threads must be at least 1");
  return c;
}

json solve_to_json(const SolveConfig& c) {
  const OptimizerConfig& o = c.optimizer;
  const LossWeights& w = c.weights;
  return json{
      {"optimizer",
       {{"max_iterations", o.max_iterations}, {"step", o.step}, {"pose_step", o.pose_step},
        {"scale_step", o.scale_step}, {"intrinsics_step", o.intrinsics_step},
        {"extrinsics_step", o.extrinsics_step}, {"tolerance", o.tolerance}, {"window", o.window},
        {"warmup_fraction", o.warmup_fraction}, {"ramp_fraction", o.ramp_fraction},
        {"freeze_intrinsics", o.freeze_intrinsics}, {"refine_iterations", o.refine_iterations},
        {"refine_tolerance", o.refine_tolerance}}},
      {"weights",
       {{"w3d", w.w3d}, {"w2d", w.w2d}, {"wcal", w.wcal}, {"wcross", w.wcross}, {"w_rot", w.w_rot},
        {"w_trans", w.w_trans}, {"cross_enabled", w.cross_enabled}, {"robust", w.robust},
        {"huber_3d", w.huber_3d}, {"huber_2d", w.huber_2d}}},
      {"graph",
       {{"anchors", c.graph.anchors}, {"neighbors", c.graph.neighbors},
        {"spanning_tree_repair", c.graph.spanning_tree_repair}}},
      {"init",
       {{"ransac_iterations", c.init.ransac_iterations}, {"ransac_threshold", c.init.ransac_threshold},
        {"observability_threshold", c.init.observability_threshold}, {"seed", c.init.seed}}},
      {"ground",
       {{"iterations", c.ground.iterations}, {"inlier_threshold", c.ground.inlier_threshold},
        {"min_consensus", c.ground.min_consensus}, {"seed", c.ground.seed}}},
      {"unmasked_consensus", c.unmasked_consensus},
      {"threads", c.threads}};
}

json load_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

}  // namespace rigrecon::cli
