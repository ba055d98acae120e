#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ranslicer/harness.hpp"
#include "ranslicer/json_io.hpp"
#include "ranslicer/queueing.hpp"
#include "ranslicer/slicing.hpp"
#include "ranslicer/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

int cmd_run(const std::string& scenario_path, std::uint64_t seed_override,
            int samples_override, const std::string& out_path) {
  auto sc = ranslicer::json_io::scenario_from_json(load_json(scenario_path));
  if (seed_override != 0) sc.seed = seed_override;
  if (samples_override > 0) sc.sample_override = samples_override;
  ranslicer::harness::RunReport report;
  report.rows.push_back(ranslicer::harness::run_one(sc));
  write_text(out_path, ranslicer::harness::to_csv(report));
  return kExitOk;
}

int cmd_sweep(const std::string& scenario_path, std::string param,
              std::string grid_csv, const std::string& algorithms_csv,
              const std::string& seeds_csv, int jobs,
              const std::string& out_path) {
  auto sc = ranslicer::json_io::scenario_from_json(load_json(scenario_path));
  if (param.empty()) param = sc.sweep_param;
  std::vector<std::string> grid = split_list(grid_csv);
  if (grid.empty()) grid = sc.sweep_grid;
  if (param.empty() || grid.empty())
    throw std::runtime_error(
        "sweep needs --param/--grid or a sweep block in the scenario");
  std::vector<ranslicer::slicing::Algorithm> algorithms;
  if (algorithms_csv.empty()) {
    algorithms.push_back(sc.algorithm);
  } else {
    for (const auto& name : split_list(algorithms_csv))
      algorithms.push_back(ranslicer::harness::algorithm_from_name(name));
  }
  std::vector<std::uint64_t> seeds;
  if (seeds_csv.empty()) {
    seeds.push_back(sc.seed);
  } else {
    for (const auto& token : split_list(seeds_csv))
      seeds.push_back(std::stoull(token));
  }
  const auto report =
      ranslicer::harness::sweep(sc, param, grid, algorithms, seeds, jobs);
  write_text(out_path, ranslicer::harness::to_csv(report));
  return kExitOk;
}

int cmd_blocking(const std::string& scenario_path, std::uint64_t horizon,
                 std::uint64_t seed, int q, const std::string& out_path) {
  const auto sc =
      ranslicer::json_io::blocking_from_json(load_json(scenario_path));
  const auto size = ranslicer::queueing::state_space_size(sc);
  const auto exact = ranslicer::queueing::blocking_prob_exact(sc);
  const auto mc = ranslicer::queueing::blocking_prob_mc(sc, horizon, seed);
  std::ostringstream csv;
  csv << "slice,state_space,p_exact,p_mc,mc_ci_half,q,p_before,p_after,"
         "lemma1_holds\n";
  for (std::size_t k = 0; k < sc.slices.size(); ++k) {
    const auto lem = ranslicer::queueing::lemma1_scaling_check(
        sc, static_cast<int>(k), q, horizon, seed);
    csv << sc.slices[k].id << ',' << size << ',' << fmt9(exact[k]) << ','
        << fmt9(mc.blocking[k]) << ',' << fmt9(mc.ci_half_width[k]) << ',' << q
        << ',' << fmt9(lem.blocking_before[k]) << ','
        << fmt9(lem.blocking_after[k]) << ',' << (lem.holds ? 1 : 0) << '\n';
  }
  write_text(out_path, csv.str());
  return kExitOk;
}

int cmd_solve(const std::string& problem_path, double tol,
              const std::string& out_path) {
  const auto prob =
      ranslicer::json_io::subproblem_from_json(load_json(problem_path));
  ranslicer::solver::SolveOptions opt;
  opt.tol = tol;
  const auto res = ranslicer::solver::solve(prob, opt);
  write_text(out_path,
             ranslicer::json_io::solve_result_to_json(res).dump(2) + "\n");
  return res.status == ranslicer::solver::SolveStatus::infeasible
             ? kExitInfeasible
             : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CoMP RAN-slicing simulator for multicast eMBB and bursty "
               "URLLC multiplexing"};
  app.require_subcommand(1);

  std::string scenario_path, out_path, param, grid_csv, algorithms_csv,
      seeds_csv;
  std::uint64_t seed = 0, horizon = 1000000;
  int samples = 0, jobs = 0, q = 2;
  double tol = 1e-6;

  auto* run = app.add_subcommand("run", "run one scenario");
  run->add_option("scenario", scenario_path, "scenario JSON")->required();
  run->add_option("--seed", seed, "seed override");
  run->add_option("--samples", samples, "SAA sample override (M)");
  run->add_option("--out", out_path, "output CSV (default stdout)");

  auto* sw = app.add_subcommand("sweep", "sweep a parameter grid");
  sw->add_option("scenario", scenario_path, "scenario JSON")->required();
  sw->add_option("--param", param, "parameter to sweep");
  sw->add_option("--grid", grid_csv, "comma-separated grid values");
  sw->add_option("--algorithms", algorithms_csv,
                 "comma-separated algorithms (default: scenario's)");
  sw->add_option("--seeds", seeds_csv, "comma-separated seeds");
  sw->add_option("--jobs", jobs, "worker threads (default: hardware)");
  sw->add_option("--out", out_path, "output CSV (default stdout)");

  auto* bl = app.add_subcommand("blocking", "loss-system blocking analysis");
  bl->add_option("scenario", scenario_path, "blocking scenario JSON")
      ->required();
  bl->add_option("--horizon", horizon, "Monte Carlo arrivals");
  bl->add_option("--seed", seed, "Monte Carlo seed");
  bl->add_option("--q", q, "PRB narrowing factor for the scaling check");
  bl->add_option("--out", out_path, "output CSV (default stdout)");

  auto* sv = app.add_subcommand("solve", "solve one convex subproblem");
  sv->add_option("problem", scenario_path, "subproblem JSON")->required();
  sv->add_option("--tol", tol, "relative optimality gap");
  sv->add_option("--out", out_path, "output JSON (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(scenario_path, seed, samples, out_path);
    if (sw->parsed())
      return cmd_sweep(scenario_path, param, grid_csv, algorithms_csv,
                       seeds_csv, jobs, out_path);
    if (bl->parsed())
      return cmd_blocking(scenario_path, horizon, seed == 0 ? 1 : seed, q,
                          out_path);
    if (sv->parsed()) return cmd_solve(scenario_path, tol, out_path);
  } catch (const ranslicer::slicing::SlotError& e) {
    std::cerr << "infeasible scenario: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
