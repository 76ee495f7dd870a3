#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "rigrecon/optimizer.hpp"
#include "rigrecon/synthetic.hpp"

namespace rigrecon::cli {

/// Scenario JSON: optional "preset" as the base, then any ScenarioConfig field
/// by name ("mode": "arm" | "mobile", "board": {"rows", "cols", "square"} or
/// null, "lambda": number or list). Unknown keys are rejected (InvalidConfig).
ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& c);

/// Solver JSON with the sections "optimizer", "weights", "graph", "init",
/// "ground" and the top-level keys "unmasked_consensus", "threads".
SolveConfig solve_from_json(const nlohmann::json& j);
nlohmann::json solve_to_json(const SolveConfig& c);

/// Throws IoFailure or InvalidConfig.
nlohmann::json load_json(const std::filesystem::path& path);

}  // namespace rigrecon::cli
