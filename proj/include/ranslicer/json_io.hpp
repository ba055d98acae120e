#pragma once

#include <json.hpp>

#include "ranslicer/harness.hpp"
#include "ranslicer/queueing.hpp"
#include "ranslicer/solver.hpp"

// JSON schemas for the file formats the CLI consumes and emits. Parsing is
// strict: unknown keys are rejected.

namespace ranslicer::json_io {

harness::Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const harness::Scenario& sc);

/// Concrete topology with explicit BS/UE positions.
channel::Topology topology_from_json(const nlohmann::json& j);
nlohmann::json topology_to_json(const channel::Topology& t);

queueing::BlockingScenario blocking_from_json(const nlohmann::json& j);
nlohmann::json blocking_to_json(const queueing::BlockingScenario& sc);

solver::ConvexSubproblem subproblem_from_json(const nlohmann::json& j);
nlohmann::json subproblem_to_json(const solver::ConvexSubproblem& p);

nlohmann::json solve_result_to_json(const solver::SolveResult& r);

}  // namespace ranslicer::json_io
