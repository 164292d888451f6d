// relaxfree: command-line front end.
//
//   relaxfree run scenarios/three_level_T10.json --out-dir out
//   relaxfree three-level --k 1 --T 10 --json sol.json --pulses-csv pulses.csv
//   relaxfree four-level --k 1 --T 2 --json sol.json
//   relaxfree topology graph.json
//   relaxfree verify three-level --trials 1000

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "relaxfree/scenario.hpp"

namespace {

using relaxfree::json;

struct Common {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::string json_summary;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out-dir", c.out_dir, "Directory for artifacts")->capture_default_str();
  app->add_option("--seed", c.seed, "RNG seed (overrides the scenario)");
  app->add_option("--tol", c.tol, "Integrator tolerance (overrides RELAXFREE_TOL and the scenario)");
  app->add_option("--json-summary", c.json_summary, "Write a machine-readable summary ('-' for stdout)");
}

int finish(const relaxfree::RunOutcome& r, const Common& c) {
  for (const auto& line : r.lines) (r.exit_code >= 2 ? std::cerr : std::cout) << line << '\n';
  if (c.json_summary == "-") {
    std::cout << relaxfree::dump(r.summary);
  } else if (!c.json_summary.empty()) {
    try {
      relaxfree::atomic_write(c.json_summary, relaxfree::dump(r.summary));
    } catch (const std::exception& e) {
      std::cerr << "input error: " << e.what() << '\n';
      return relaxfree::exit_input;
    }
  }
  return r.exit_code;
}

// Runs an inline scenario through the same path as `run`.
int run_inline(const json& scenario, const Common& c) {
  relaxfree::RunOutcome r;
  relaxfree::RunOptions o{c.out_dir, c.seed, c.tol};
  try {
    r = relaxfree::run_scenario(relaxfree::parse_scenario(scenario), o);
  } catch (const relaxfree::numerical_error& e) {
    r.exit_code = relaxfree::exit_numerical;
    r.lines.push_back(std::string("numerical failure: ") + e.what());
  } catch (const std::exception& e) {
    r.exit_code = relaxfree::exit_input;
    r.lines.push_back(std::string("input error: ") + e.what());
  }
  r.summary = {{"kind", scenario.value("kind", "")},
               {"exit_code", r.exit_code},
               {"artifacts", r.artifacts},
               {"messages", r.lines},
               {"result", r.summary}};
  return finish(r, c);
}

void put_output(json& outputs, const char* key, const std::string& path) {
  if (!path.empty()) outputs[key] = path;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relaxation-free optimal control for decaying quantum chains"};
  app.require_subcommand(1);
  Common common;

  auto* run = app.add_subcommand("run", "Run a JSON scenario");
  std::string scenario_path;
  run->add_option("scenario", scenario_path, "Scenario file")->required();
  add_common(run, common);

  struct LevelArgs {
    double k = 1, a = 1, T = 10;
    std::size_t samples = 201;
    double pump_cap = 0;
    std::string json_out, pulses_csv, trajectory_csv;
  };
  LevelArgs three, four;
  auto add_level = [&](CLI::App* sub, LevelArgs& la) {
    sub->add_option("--k", la.k, "Decay rate of the intermediate level(s)")->required();
    sub->add_option("--A", la.a, "Coupling bound")->capture_default_str();
    sub->add_option("--T", la.T, "Horizon")->required();
    sub->add_option("--samples", la.samples, "Output grid size")->capture_default_str();
    sub->add_option("--pump-cap", la.pump_cap, "Amplitude at which the unbounded pump is cut off (0: 1e4 A)");
    sub->add_option("--json", la.json_out, "Solution JSON (relative to --out-dir)");
    sub->add_option("--pulses-csv", la.pulses_csv, "Pulse CSV (relative to --out-dir)");
    sub->add_option("--trajectory-csv", la.trajectory_csv, "Trajectory CSV (relative to --out-dir)");
    add_common(sub, common);
  };
  auto* three_cmd = app.add_subcommand("three-level", "Finite-time optimum of the Lambda system");
  add_level(three_cmd, three);
  std::string mode = "optimal";
  double beta = 0, phi = 0, edge = 0;
  three_cmd->add_option("--mode", mode, "optimal or stirap")->check(CLI::IsMember({"optimal", "stirap"}));
  three_cmd->add_option("--beta", beta, "Final mixing angle (stirap)");
  three_cmd->add_option("--phi", phi, "Relative phase (stirap)");
  three_cmd->add_option("--edge-width", edge, "Half-cosine edge duration (stirap)");
  auto* four_cmd = app.add_subcommand("four-level", "Finite-time optimum of the four-level chain");
  add_level(four_cmd, four);

  auto* topo = app.add_subcommand("topology", "Controllability of a relaxation-free subspace");
  std::string graph_path, topo_json, witness_csv;
  topo->add_option("graph", graph_path, "Graph JSON")->required();
  topo->add_option("--json", topo_json, "Report JSON (relative to --out-dir)");
  topo->add_option("--witness-csv", witness_csv, "Witness paths CSV (relative to --out-dir)");
  add_common(topo, common);

  auto* ver = app.add_subcommand("verify", "Compare the oracle with the analytic optima");
  std::string suite;
  std::size_t trials = 1000, segments = 32, ascents = 10;
  std::string verify_json;
  ver->add_option("suite", suite, "Suite name")->required()->check(CLI::IsMember(relaxfree::verify_suite_names()));
  ver->add_option("--trials", trials)->capture_default_str();
  ver->add_option("--segments", segments)->capture_default_str();
  ver->add_option("--ascents", ascents)->capture_default_str();
  ver->add_option("--json", verify_json, "Report JSON (relative to --out-dir)");
  add_common(ver, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : relaxfree::exit_input;
  }

  if (run->parsed()) {
    const auto r = relaxfree::run_scenario_file(scenario_path, {common.out_dir, common.seed, common.tol});
    return finish(r, common);
  }
  auto level_scenario = [](const char* kind, const LevelArgs& la) {
    json s{{"schema_version", relaxfree::kSchemaVersion},
           {"kind", kind},
           {"params", {{"k", la.k}, {"A", la.a}, {"T", la.T}, {"samples", la.samples}}},
           {"outputs", json::object()}};
    if (la.pump_cap > 0) s["params"]["pump_cap"] = la.pump_cap;
    put_output(s["outputs"], "json", la.json_out);
    put_output(s["outputs"], "pulses_csv", la.pulses_csv);
    put_output(s["outputs"], "trajectory_csv", la.trajectory_csv);
    return s;
  };
  if (three_cmd->parsed()) {
    json s = level_scenario("three-level", three);
    s["params"]["mode"] = mode;
    if (mode == "stirap") {
      if (three_cmd->count("--beta")) s["params"]["beta"] = beta;
      if (three_cmd->count("--phi")) s["params"]["phi"] = phi;
      if (three_cmd->count("--edge-width")) s["params"]["edge_width"] = edge;
    }
    return run_inline(s, common);
  }
  if (four_cmd->parsed()) return run_inline(level_scenario("four-level", four), common);
  if (topo->parsed()) {
    json graph;
    try {
      graph = json::parse(relaxfree::read_file(graph_path));
    } catch (const std::exception& e) {
      std::cerr << "input error: " << e.what() << '\n';
      return relaxfree::exit_input;
    }
    json s{{"schema_version", relaxfree::kSchemaVersion},
           {"kind", "topology"},
           {"params", {{"graph", graph}}},
           {"outputs", json::object()}};
    put_output(s["outputs"], "json", topo_json);
    put_output(s["outputs"], "witness_csv", witness_csv);
    return run_inline(s, common);
  }
  json s{{"schema_version", relaxfree::kSchemaVersion},
         {"kind", "verify"},
         {"params", {{"suite", suite}, {"trials", trials}, {"segments", segments}, {"ascents", ascents}}},
         {"outputs", json::object()}};
  put_output(s["outputs"], "json", verify_json);
  return run_inline(s, common);
}
