#pragma once
// JSON scenarios: validation, dispatch, artifact output.
//
// {
//   "schema_version": 1,
//   "kind": "three-level" | "four-level" | "n-chain-bound" | "topology" | "verify" | "figure",
//   "name": "...",                       optional
//   "params": { ... },                   kind specific
//   "outputs": { "<artifact>": "relative/path" },
//   "seed": 7, "tolerance": 1e-10        optional
// }
// When A is omitted it defaults to 1, so times are in units of 1/A.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "relaxfree/errors.hpp"
#include "relaxfree/four_level.hpp"
#include "relaxfree/io.hpp"
#include "relaxfree/n_chain.hpp"
#include "relaxfree/propagator.hpp"
#include "relaxfree/three_level.hpp"
#include "relaxfree/verify.hpp"

namespace relaxfree {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { exit_ok = 0, exit_negative = 1, exit_input = 2, exit_numerical = 3 };

struct Scenario {
  std::string kind;
  std::string name;
  json params = json::object();
  std::map<std::string, std::string> outputs;
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
};

struct RunOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
};

struct RunOutcome {
  int exit_code = exit_ok;
  std::vector<std::string> lines;      // one human-readable line per result
  std::vector<std::string> artifacts;  // paths written
  json summary = json::object();
};

namespace detail {

struct KindSchema {
  std::vector<std::string_view> params;
  std::vector<std::string_view> required;
  std::vector<std::string_view> outputs;
};

inline const std::map<std::string, KindSchema>& schemas() {
  static const std::map<std::string, KindSchema> s{
      {"three-level",
       {{"k", "A", "T", "samples", "pump_cap", "mode", "beta", "phi", "edge_width"},
        {"k", "T"},
        {"json", "pulses_csv", "trajectory_csv"}}},
      {"four-level", {{"k", "A", "T", "samples", "pump_cap"}, {"k", "T"}, {"json", "pulses_csv", "trajectory_csv"}}},
      {"n-chain-bound", {{"run", "xi", "k", "A", "T"}, {"run"}, {"json"}}},
      {"topology", {{"graph"}, {"graph"}, {"json", "witness_csv"}}},
      {"verify", {{"suite", "trials", "segments", "ascents", "slack"}, {"suite"}, {"json"}}},
      {"figure", {{"figure", "k", "A", "T", "cases", "samples", "pump_cap", "graph", "source", "target"},
                  {"figure"},
                  {"csv"}}},
  };
  return s;
}

inline bool contains(const std::vector<std::string_view>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

inline double num(const json& p, const char* key, double fallback) {
  if (!p.contains(key)) return fallback;
  require(p.at(key).is_number(), fmt::format("params.{} must be a number", key));
  return p.at(key).get<double>();
}
inline double num(const json& p, const char* key) {
  require(p.contains(key), fmt::format("params.{} is required", key));
  return num(p, key, 0.0);
}
inline std::size_t count(const json& p, const char* key, std::size_t fallback) {
  if (!p.contains(key)) return fallback;
  require(p.at(key).is_number_integer() && p.at(key).get<long long>() >= 1,
          fmt::format("params.{} must be a positive integer", key));
  return p.at(key).get<std::size_t>();
}
inline std::vector<double> num_list(const json& p, const char* key, std::vector<double> fallback) {
  if (!p.contains(key)) return fallback;
  const json& v = p.at(key);
  if (v.is_number()) return {v.get<double>()};
  require(v.is_array() && !v.empty(), fmt::format("params.{} must be a number or a non-empty list", key));
  std::vector<double> out;
  for (const auto& x : v) {
    require(x.is_number(), fmt::format("params.{} entries must be numbers", key));
    out.push_back(x.get<double>());
  }
  return out;
}
inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  if (n > 1) v.back() = b;
  return v;
}

}  // namespace detail

inline Scenario parse_scenario(const json& j) {
  detail::require_keys(j, {"schema_version", "kind", "name", "params", "outputs", "seed", "tolerance"}, "scenario");
  detail::require(j.contains("schema_version") && j.at("schema_version").is_number_integer(),
                  "schema_version is required");
  detail::require(j.at("schema_version").get<int>() == kSchemaVersion,
                  fmt::format("unsupported schema_version {} (expected {})", j.at("schema_version").dump(),
                              kSchemaVersion));
  detail::require(j.contains("kind") && j.at("kind").is_string(), "kind is required");
  Scenario s;
  s.kind = j.at("kind").get<std::string>();
  const auto& sch = detail::schemas();
  const auto it = sch.find(s.kind);
  detail::require(it != sch.end(), "unknown kind '" + s.kind + "'");
  if (j.contains("name")) s.name = j.at("name").get<std::string>();
  if (j.contains("params")) s.params = j.at("params");
  detail::require(s.params.is_object(), "params must be an object");
  for (const auto& [key, _] : s.params.items())
    detail::require(detail::contains(it->second.params, key), "unknown field 'params." + key + "' for kind " + s.kind);
  for (auto req : it->second.required)
    detail::require(s.params.contains(std::string(req)), "params." + std::string(req) + " is required");
  if (j.contains("outputs")) {
    detail::require(j.at("outputs").is_object(), "outputs must be an object");
    for (const auto& [key, v] : j.at("outputs").items()) {
      detail::require(detail::contains(it->second.outputs, key), "unknown output 'outputs." + key + "' for kind " + s.kind);
      detail::require(v.is_string() && !v.get<std::string>().empty(), "outputs." + key + " must be a path");
      s.outputs[key] = v.get<std::string>();
    }
  }
  if (j.contains("seed")) {
    detail::require(j.at("seed").is_number_unsigned(), "seed must be a non-negative integer");
    s.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("tolerance")) {
    detail::require(j.at("tolerance").is_number(), "tolerance must be a number");
    s.tolerance = j.at("tolerance").get<double>();
  }
  return s;
}

// Precedence: explicit option, then RELAXFREE_TOL, then scenario, then 1e-10.
inline double resolve_tolerance(const Scenario& s, const RunOptions& o) {
  double tol = 1e-10;
  if (s.tolerance) tol = *s.tolerance;
  if (const char* env = std::getenv("RELAXFREE_TOL"); env && *env) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    detail::require(end && *end == '\0', std::string("RELAXFREE_TOL is not a number: ") + env);
    tol = v;
  }
  if (o.tolerance) tol = *o.tolerance;
  detail::require(tol > 0 && tol <= 1e-3, "tolerance must lie in (0, 1e-3]");
  return tol;
}

namespace detail {

class ArtifactSet {
 public:
  ArtifactSet(const Scenario& s, const RunOptions& o) : s_(s), o_(o) {}
  bool wants(const std::string& key) const { return s_.outputs.contains(key); }
  void add(const std::string& key, std::string content) {
    if (wants(key)) files_.emplace_back(o_.out_dir / s_.outputs.at(key), std::move(content));
  }
  std::vector<std::string> commit() {
    std::vector<std::string> out;
    for (auto& [p, c] : files_) {
      atomic_write(p, c);
      out.push_back(p.string());
    }
    return out;
  }

 private:
  const Scenario& s_;
  const RunOptions& o_;
  std::vector<std::pair<std::filesystem::path, std::string>> files_;
};

inline std::string fmt_num(double x) { return fmt::format("{:.10g}", x); }

inline void run_three_level(const Scenario& s, double tol, ArtifactSet& art, RunOutcome& out) {
  const json& p = s.params;
  const double k = num(p, "k"), a = num(p, "A", 1.0), T = num(p, "T");
  const std::size_t samples = count(p, "samples", 201);
  const std::string mode = p.value("mode", std::string("optimal"));
  require(mode == "optimal" || mode == "stirap", "params.mode must be 'optimal' or 'stirap'");
  if (mode == "optimal") {
    for (auto key : {"beta", "phi", "edge_width"})
      require(!p.contains(key), fmt::format("params.{} only applies to mode 'stirap'", key));
    const ThreeLevelSolution sol(k, a, T);
    const OptimalPulses pulses(sol, num(p, "pump_cap", 0.0));
    const auto grid = pulse_grid(T, samples);
    json j = to_json(sol, grid);
    j["pump_cutoff_time"] = pulses.cutoff_time();
    j["pump_cap"] = pulses.cap();
    if (art.wants("trajectory_csv") || art.wants("json")) {
      const Trajectory tr = propagate(ChainSystem::lambda(k, a), pulses, ground_state(3), T, tol, grid);
      j["propagated_efficiency"] = tr.final_state()(2);
      art.add("trajectory_csv", trajectory_csv(tr));
    }
    art.add("json", dump(j));
    art.add("pulses_csv", pulse_csv(pulses, grid));
    out.lines.push_back(fmt::format("three-level k={} A={} T={}: case {}, T_M={}, tau={}, efficiency={}", fmt_num(k),
                                    fmt_num(a), fmt_num(T), to_string(sol.case_label()), fmt_num(sol.critical_time()),
                                    fmt_num(sol.tau()), fmt_num(sol.efficiency())));
    out.summary = {{"case", to_string(sol.case_label())},
                   {"critical_time", sol.critical_time()},
                   {"tau", sol.tau()},
                   {"efficiency", sol.efficiency()}};
    return;
  }
  require(!p.contains("pump_cap"), "params.pump_cap only applies to mode 'optimal'");
  StirapOptions so;
  so.samples = std::max<std::size_t>(samples, 3);
  so.edge_width = num(p, "edge_width", 0.0);
  const double beta = num(p, "beta", std::numbers::pi / 2), phi = num(p, "phi", 0.0);
  const StirapPulses sp = stirap_limit_pulses(k, a, T, beta, phi, so);
  const double total = sp.schedule.duration();
  const Trajectory tr = propagate(ChainSystem::lambda(k, a), sp.schedule, ground_state(3), total, tol, sp.schedule.grid());
  double max_p2 = 0;
  for (const auto& pop : tr.populations) max_p2 = std::max(max_p2, pop[1]);
  const auto& xf = tr.final_state();
  json j{{"mode", "stirap"},     {"k", k},           {"A", a},
         {"T", T},               {"beta", beta},     {"phi", phi},
         {"edge_width", so.edge_width},              {"final_populations", {xf(0) * xf(0), xf(1) * xf(1), xf(2) * xf(2)}},
         {"max_population_2", max_p2},               {"schedule", to_json(sp.schedule)}};
  art.add("json", dump(j));
  art.add("pulses_csv", schedule_csv(sp.schedule));
  art.add("trajectory_csv", trajectory_csv(tr));
  out.lines.push_back(fmt::format("stirap k={} A={} T={} beta={}: final p3={}, max p2={}", fmt_num(k), fmt_num(a),
                                  fmt_num(T), fmt_num(beta), fmt_num(xf(2) * xf(2)), fmt_num(max_p2)));
  out.summary = {{"final_population_3", xf(2) * xf(2)}, {"max_population_2", max_p2}};
}

inline void run_four_level(const Scenario& s, double tol, ArtifactSet& art, RunOutcome& out) {
  const json& p = s.params;
  const double k = num(p, "k"), a = num(p, "A", 1.0), T = num(p, "T");
  const std::size_t samples = count(p, "samples", 201);
  const FourLevelSolution sol(k, a, T);
  const FourLevelPulses pulses(sol, num(p, "pump_cap", 0.0));
  const auto grid = pulse_grid(T, samples);
  json j = to_json(sol, grid);
  if (art.wants("trajectory_csv") || art.wants("json")) {
    const Trajectory tr = propagate(ChainSystem::four_level(k, a), pulses, ground_state(4), T, tol, grid);
    j["propagated_efficiency"] = tr.final_state()(3);
    art.add("trajectory_csv", trajectory_csv(tr));
  }
  art.add("json", dump(j));
  art.add("pulses_csv", pulse_csv(pulses, grid));
  out.lines.push_back(fmt::format("four-level k={} A={} T={}: case {}, tau={}, efficiency={}, infinite-time={}",
                                  fmt_num(k), fmt_num(a), fmt_num(T), to_string(sol.case_label()), fmt_num(sol.tau()),
                                  fmt_num(sol.efficiency()), fmt_num(sol.efficiency_infinite())));
  out.summary = {{"case", to_string(sol.case_label())},
                 {"tau", sol.tau()},
                 {"efficiency", sol.efficiency()},
                 {"efficiency_infinite", sol.efficiency_infinite()}};
}

inline void run_bound(const Scenario& s, ArtifactSet& art, RunOutcome& out) {
  const json& p = s.params;
  require(p.at("run").is_number_integer() && p.at("run").get<int>() >= 0, "params.run must be a non-negative integer");
  const int run = p.at("run").get<int>();
  const bool has_k = p.contains("k");
  require(!(p.contains("xi") && has_k), "give either params.xi or params.k (with optional A)");
  const double a = num(p, "A", 1.0);
  const double k = has_k ? num(p, "k") : num(p, "xi", 0.0) * a;
  require(p.contains("xi") || has_k, "params.xi or params.k is required");
  const double xi = k / a;
  json j{{"run", run}, {"xi", xi}, {"bound_infinite", chain_efficiency_upper_bound(run, xi)}};
  std::string line = fmt::format("chain bound run={} xi={}: infinite-time {}", run, fmt_num(xi),
                                 fmt_num(chain_efficiency_upper_bound(run, xi)));
  if (p.contains("T")) {
    const double T = num(p, "T");
    const double fin = run == 0 ? 1.0 : run == 1 ? efficiency_bound(k, a, T) : four_level_efficiency(k, a, T);
    j["T"] = T;
    j["bound_finite"] = fin;
    line += fmt::format(", T={} finite-time {}", fmt_num(T), fmt_num(fin));
  }
  art.add("json", dump(j));
  out.lines.push_back(line);
  out.summary = j;
}

inline void run_topology(const Scenario& s, ArtifactSet& art, RunOutcome& out) {
  const CouplingGraph g = coupling_graph_from_json(s.params.at("graph"));
  const ControllabilityReport r = is_controllable(g);
  art.add("json", dump(to_json(r)));
  CsvWriter w({"source", "target", "step", "node", "decays"});
  for (std::size_t i = 0; i < r.pairs.size(); ++i)
    for (std::size_t k = 0; k < r.witnesses[i].nodes.size(); ++k) {
      const int v = r.witnesses[i].nodes[k];
      w.cell(r.pairs[i].first).cell(r.pairs[i].second).cell(k).cell(v).cell(g.decays(v) ? 1 : 0);
      w.end_row();
    }
  art.add("witness_csv", w.str());
  if (r.controllable) {
    out.lines.push_back(fmt::format("topology: controllable ({} pairs)", r.pairs.size()));
  } else {
    out.lines.push_back(fmt::format("topology: not controllable, no admissible path between {} and {}",
                                    r.counterexample->first, r.counterexample->second));
    out.exit_code = exit_negative;
  }
  out.summary = to_json(r);
}

inline void run_verify(const Scenario& s, std::uint64_t seed, ArtifactSet& art, RunOutcome& out) {
  const json& p = s.params;
  VerifyOptions o;
  o.seed = seed;
  o.trials = count(p, "trials", o.trials);
  o.segments = count(p, "segments", o.segments);
  if (p.contains("ascents")) {
    require(p.at("ascents").is_number_integer() && p.at("ascents").get<long long>() >= 0,
            "params.ascents must be a non-negative integer");
    o.ascents = p.at("ascents").get<std::size_t>();
  }
  o.slack = num(p, "slack", o.slack);
  const VerifyReport r = run_verify_suite(p.at("suite").get<std::string>(), o);
  art.add("json", dump(to_json(r)));
  for (const auto& v : r.instances)
    out.lines.push_back(fmt::format("verify {}: {} analytic={} oracle={} margin={}", r.suite, v.name,
                                    fmt_num(v.analytic), fmt_num(v.oracle), fmt_num(v.margin)) +
                        (v.passed ? " PASS" : " FAIL"));
  if (!r.passed) out.exit_code = exit_negative;
  out.summary = to_json(r);
}

// Representative graph: |1> and |4> joined by type II, type I, type II segments.
inline json default_concat_graph() {
  return json::parse(R"({"nodes":[{"id":1,"decays":false},{"id":2,"decays":false},{"id":3,"decays":false},
    {"id":4,"decays":false},{"id":5,"decays":true},{"id":6,"decays":true}],
    "edges":[[1,5],[5,2],[2,3],[3,6],[6,4]],"subspace":[1,2,3,4]})");
}

inline void run_figure(const Scenario& s, double tol, ArtifactSet& art, RunOutcome& out) {
  const json& p = s.params;
  const std::string fig = p.at("figure").get<std::string>();
  auto reject = [&](std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : p.items()) {
      bool ok = key == "figure";
      for (auto a : allowed) ok = ok || key == a;
      require(ok, "unknown field 'params." + key + "' for figure " + fig);
    }
  };
  (void)tol;
  if (fig == "fig2") {
    reject({"A", "cases", "samples", "pump_cap"});
    const double a = num(p, "A", 1.0);
    std::vector<std::pair<double, double>> cases{{0.5, 2.0}, {1.0, 5.0}, {2.0, 10.0}};
    if (p.contains("cases")) {
      cases.clear();
      for (const auto& c : p.at("cases")) {
        require(c.is_array() && c.size() == 2, "params.cases entries must be [k, T] pairs");
        cases.emplace_back(c[0].get<double>(), c[1].get<double>());
      }
    }
    CsvWriter w({"k", "T", "time", "u", "omega_p", "omega_s", "pump_unbounded"});
    std::vector<double> v(2);
    for (auto [k, T] : cases) {
      const OptimalPulses pulses(ThreeLevelSolution(k, a, T), num(p, "pump_cap", 0.0));
      for (double t : pulse_grid(T, count(p, "samples", 201))) {
        pulses.evaluate(t, v);
        w.cell(k).cell(T).cell(t).cell(pulses.solution().u(t)).cell(v[0]).cell(v[1]).cell(pulses.flagged_at(0, t) ? 1 : 0);
        w.end_row();
      }
    }
    art.add("csv", w.str());
    out.lines.push_back(fmt::format("figure fig2: {} (k, T) cases", cases.size()));
  } else if (fig == "figTM") {
    reject({"k", "A"});
    const auto ks = num_list(p, "k", linspace(0.1, 10, 100));
    const auto as = num_list(p, "A", linspace(0.1, 10, 100));
    CsvWriter w({"k", "A", "critical_time"});
    for (double k : ks)
      for (double a : as) {
        w.cell(k).cell(a).cell(critical_time(k, a));
        w.end_row();
      }
    art.add("csv", w.str());
    out.lines.push_back(fmt::format("figure figTM: {} x {} grid", ks.size(), as.size()));
  } else if (fig == "fig5") {
    reject({"k", "A", "T", "samples", "pump_cap"});
    const double k = num(p, "k", 1.0), a = num(p, "A", 1.0);
    const auto Ts = num_list(p, "T", {0.4, 2.0, 5.0, 10.0});
    CsvWriter w({"T", "case", "time", "u1", "u2", "omega_p", "omega_i", "omega_s", "pump_unbounded",
                 "stokes_unbounded"});
    std::vector<double> v(3);
    for (double T : Ts) {
      const FourLevelPulses pulses(FourLevelSolution(k, a, T), num(p, "pump_cap", 0.0));
      const auto& sol = pulses.solution();
      for (double t : pulse_grid(T, count(p, "samples", 201))) {
        pulses.evaluate(t, v);
        w.cell(T).cell(to_string(sol.case_label())).cell(t).cell(sol.u1(t)).cell(sol.u2(t));
        w.cell(v[0]).cell(v[1]).cell(v[2]).cell(pulses.flagged_at(0, t) ? 1 : 0).cell(pulses.flagged_at(2, t) ? 1 : 0);
        w.end_row();
      }
    }
    art.add("csv", w.str());
    out.lines.push_back(fmt::format("figure fig5: {} horizons", Ts.size()));
  } else if (fig == "fig6") {
    reject({"k", "A", "T"});
    const auto ks = num_list(p, "k", {0.1, 1.0, 10.0});
    const double a = num(p, "A", 1.0);
    const auto Ts = num_list(p, "T", linspace(0.1, 20, 200));
    CsvWriter w({"k", "T", "efficiency"});
    for (double k : ks)
      for (double T : Ts) {
        w.cell(k).cell(T).cell(efficiency_bound(k, a, T));
        w.end_row();
      }
    art.add("csv", w.str());
    out.lines.push_back(fmt::format("figure fig6: {} decay rates x {} horizons", ks.size(), Ts.size()));
  } else if (fig == "fig7") {
    reject({"graph", "source", "target"});
    const CouplingGraph g = coupling_graph_from_json(p.contains("graph") ? p.at("graph") : default_concat_graph());
    const int src = p.value("source", 1), dst = p.value("target", 4);
    const auto wpath = admissible_path_search(g, src, dst);
    CsvWriter w({"segment", "type", "position", "node", "decays"});
    if (wpath) {
      for (std::size_t i = 0; i < wpath->segments.size(); ++i)
        for (std::size_t k = 0; k < wpath->segments[i].nodes.size(); ++k) {
          const int v = wpath->segments[i].nodes[k];
          w.cell(i).cell(to_string(wpath->segments[i].type)).cell(k).cell(v).cell(g.decays(v) ? 1 : 0);
          w.end_row();
        }
    } else {
      out.exit_code = exit_negative;
    }
    art.add("csv", w.str());
    out.lines.push_back(wpath ? fmt::format("figure fig7: {} -> {} via {} segments", src, dst, wpath->segments.size())
                              : fmt::format("figure fig7: no admissible path {} -> {}", src, dst));
  } else {
    throw contract_error("unknown figure '" + fig + "' (expected fig2, figTM, fig5, fig6 or fig7)");
  }
  out.summary = {{"figure", fig}};
}

}  // namespace detail

inline RunOutcome run_scenario(const Scenario& s, const RunOptions& o) {
  RunOutcome out;
  const double tol = resolve_tolerance(s, o);
  const std::uint64_t seed = o.seed ? *o.seed : s.seed.value_or(1);
  detail::ArtifactSet art(s, o);
  if (s.kind == "three-level") detail::run_three_level(s, tol, art, out);
  else if (s.kind == "four-level") detail::run_four_level(s, tol, art, out);
  else if (s.kind == "n-chain-bound") detail::run_bound(s, art, out);
  else if (s.kind == "topology") detail::run_topology(s, art, out);
  else if (s.kind == "verify") detail::run_verify(s, seed, art, out);
  else detail::run_figure(s, tol, art, out);
  out.artifacts = art.commit();
  return out;
}

// Loads, validates and runs; every failure becomes an exit code and a message.
inline RunOutcome run_scenario_file(const std::filesystem::path& path, const RunOptions& o) {
  RunOutcome out;
  Scenario s;
  try {
    s = parse_scenario(json::parse(read_file(path)));
    out = run_scenario(s, o);
  } catch (const stiff_control_error& e) {
    out.exit_code = exit_numerical;
    out.lines.push_back(std::string("numerical failure: ") + e.what());
  } catch (const numerical_error& e) {
    out.exit_code = exit_numerical;
    out.lines.push_back(std::string("numerical failure: ") + e.what());
  } catch (const std::exception& e) {
    out.exit_code = exit_input;
    out.lines.push_back(std::string("input error: ") + e.what());
  }
  out.summary = {{"scenario", path.string()},
                 {"name", s.name},
                 {"kind", s.kind},
                 {"exit_code", out.exit_code},
                 {"artifacts", out.artifacts},
                 {"messages", out.lines},
                 {"result", out.summary}};
  return out;
}

}  // namespace relaxfree
