#pragma once
// JSON and CSV serialization, atomic file output.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <fmt/format.h>
#include <unistd.h>

#include "json.hpp"
#include "relaxfree/errors.hpp"
#include "relaxfree/four_level.hpp"
#include "relaxfree/model.hpp"
#include "relaxfree/n_chain.hpp"
#include "relaxfree/propagator.hpp"
#include "relaxfree/three_level.hpp"

namespace relaxfree {

using json = nlohmann::json;

// ---- CSV -----------------------------------------------------------------

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{}", x);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) : cols_(header.size()) {
    detail::require(!header.empty(), "CSV needs at least one column");
    line(header);
  }
  CsvWriter& cell(double x) { return raw(format_double(x)); }
  CsvWriter& cell(int x) { return raw(std::to_string(x)); }
  CsvWriter& cell(std::size_t x) { return raw(std::to_string(x)); }
  CsvWriter& cell(const std::string& s) { return raw(s); }
  CsvWriter& cell(const char* s) { return raw(s); }
  void end_row() {
    detail::require(row_.size() == cols_, "CSV row has wrong column count");
    line(row_);
    row_.clear();
  }
  const std::string& str() const noexcept { return out_; }

 private:
  CsvWriter& raw(std::string s) {
    row_.push_back(std::move(s));
    return *this;
  }
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      out_ += cells[i];
    }
    out_ += '\n';
  }
  std::size_t cols_;
  std::vector<std::string> row_;
  std::string out_;
};

inline std::string trajectory_csv(const Trajectory& tr) {
  const std::size_t n = tr.levels();
  std::vector<std::string> h{"time"};
  for (std::size_t i = 1; i <= n; ++i) h.push_back("x" + std::to_string(i));
  for (std::size_t i = 1; i <= n; ++i) h.push_back("p" + std::to_string(i));
  h.push_back("norm");
  CsvWriter w(h);
  for (std::size_t s = 0; s < tr.times.size(); ++s) {
    w.cell(tr.times[s]);
    for (std::size_t i = 0; i < n; ++i) w.cell(tr.states[s](static_cast<Eigen::Index>(i)));
    for (std::size_t i = 0; i < n; ++i) w.cell(tr.populations[s][i]);
    w.cell(tr.norm[s]);
    w.end_row();
  }
  return w.str();
}

// Three-level pulses: time, u, omega_p, omega_s, pump_unbounded.
inline std::string pulse_csv(const OptimalPulses& p, const std::vector<double>& grid) {
  CsvWriter w({"time", "u", "omega_p", "omega_s", "pump_unbounded"});
  std::vector<double> v(2);
  for (double t : grid) {
    p.evaluate(t, v);
    w.cell(t).cell(p.solution().u(t)).cell(v[0]).cell(v[1]).cell(p.flagged_at(0, t) ? 1 : 0);
    w.end_row();
  }
  return w.str();
}

// Four-level pulses: time, u1, u2, omega_p, omega_i, omega_s, flags.
inline std::string pulse_csv(const FourLevelPulses& p, const std::vector<double>& grid) {
  CsvWriter w({"time", "u1", "u2", "omega_p", "omega_i", "omega_s", "pump_unbounded", "stokes_unbounded"});
  std::vector<double> v(3);
  for (double t : grid) {
    p.evaluate(t, v);
    w.cell(t).cell(p.solution().u1(t)).cell(p.solution().u2(t)).cell(v[0]).cell(v[1]).cell(v[2]);
    w.cell(p.flagged_at(0, t) ? 1 : 0).cell(p.flagged_at(2, t) ? 1 : 0);
    w.end_row();
  }
  return w.str();
}

inline std::string schedule_csv(const ControlSchedule& s) {
  std::vector<std::string> h{"time"};
  for (const auto& n : s.names()) h.push_back(n);
  for (const auto& n : s.names()) h.push_back(n + "_unbounded");
  CsvWriter w(h);
  for (std::size_t i = 0; i < s.size(); ++i) {
    w.cell(s.grid()[i]);
    for (std::size_t c = 0; c < s.channels(); ++c) w.cell(s.values(c)[i]);
    for (std::size_t c = 0; c < s.channels(); ++c) w.cell(s.flagged(c, i) ? 1 : 0);
    w.end_row();
  }
  return w.str();
}

// ---- JSON ----------------------------------------------------------------

namespace detail {
inline json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
inline double number_or_inf(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}
inline void require_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& what) {
  require(j.is_object(), what + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    require(ok, "unknown field '" + key + "' in " + what);
  }
}
}  // namespace detail

inline json to_json(const ChainSystem& s) {
  return {{"decay_rates", s.decay_rates()}, {"coupling_bound", s.bound()}, {"bounded_couplings", s.bounded_couplings()}};
}

inline ChainSystem chain_system_from_json(const json& j) {
  detail::require_keys(j, {"decay_rates", "coupling_bound", "bounded_couplings"}, "chain system");
  return ChainSystem(j.at("decay_rates").get<std::vector<double>>(), j.at("coupling_bound").get<double>(),
                     j.value("bounded_couplings", std::vector<std::size_t>{}));
}

inline json to_json(const HardPulse& p) {
  return {{"time", p.time}, {"coupling", p.coupling}, {"angle", p.angle ? json(*p.angle) : json(nullptr)}};
}

inline json to_json(const ControlSchedule& s) {
  json ch = json::array();
  for (std::size_t c = 0; c < s.channels(); ++c) {
    json e{{"name", s.names()[c]}, {"values", s.values(c)}, {"bound", detail::finite_or_null(s.bound(c))}};
    std::vector<int> f;
    for (auto x : s.flags(c)) f.push_back(x);
    e["flags"] = f;
    ch.push_back(std::move(e));
  }
  json hp = json::array();
  for (const auto& p : s.hard_pulses()) hp.push_back(to_json(p));
  return {{"grid", s.grid()},
          {"interpolation", to_string(s.interpolation())},
          {"channels", std::move(ch)},
          {"hard_pulses", std::move(hp)},
          {"decay_scale", s.decay_scale_values()}};
}

inline ControlSchedule control_schedule_from_json(const json& j) {
  detail::require_keys(j, {"grid", "interpolation", "channels", "hard_pulses", "decay_scale"}, "control schedule");
  const std::string interp = j.value("interpolation", std::string("linear"));
  detail::require(interp == "linear" || interp == "constant", "interpolation must be 'linear' or 'constant'");
  std::vector<std::string> names;
  std::vector<std::vector<double>> vals;
  for (const auto& c : j.at("channels")) {
    detail::require_keys(c, {"name", "values", "bound", "flags"}, "schedule channel");
    names.push_back(c.at("name").get<std::string>());
    vals.push_back(c.at("values").get<std::vector<double>>());
  }
  ControlSchedule s(j.at("grid").get<std::vector<double>>(), names, std::move(vals),
                    interp == "linear" ? Interpolation::linear : Interpolation::constant);
  std::size_t i = 0;
  for (const auto& c : j.at("channels")) {
    if (c.contains("bound") && !c.at("bound").is_null()) s.set_bound(i, c.at("bound").get<double>());
    if (c.contains("flags")) {
      std::vector<std::uint8_t> f;
      for (int x : c.at("flags").get<std::vector<int>>()) f.push_back(static_cast<std::uint8_t>(x != 0));
      s.set_flags(i, std::move(f));
    }
    ++i;
  }
  if (j.contains("hard_pulses"))
    for (const auto& p : j.at("hard_pulses")) {
      detail::require_keys(p, {"time", "coupling", "angle"}, "hard pulse");
      HardPulse h{p.at("time").get<double>(), p.at("coupling").get<std::size_t>(), std::nullopt};
      if (p.contains("angle") && !p.at("angle").is_null()) h.angle = p.at("angle").get<double>();
      s.add_hard_pulse(h);
    }
  if (j.contains("decay_scale")) s.set_decay_scale(j.at("decay_scale").get<std::vector<double>>());
  return s;
}

inline json to_json(const ThreeLevelSolution& s, const std::vector<double>& grid) {
  std::vector<double> u;
  for (double t : grid) u.push_back(s.u(t));
  return {{"case", to_string(s.case_label())},
          {"k", s.k()},
          {"A", s.bound()},
          {"T", s.horizon()},
          {"critical_time", s.critical_time()},
          {"tau", s.tau()},
          {"u0", s.u0()},
          {"efficiency", s.efficiency()},
          {"samples", {{"time", grid}, {"u", u}}}};
}

inline json to_json(const FourLevelSolution& s, const std::vector<double>& grid) {
  std::vector<double> u1, u2;
  for (double t : grid) {
    u1.push_back(s.u1(t));
    u2.push_back(s.u2(t));
  }
  json j{{"case", to_string(s.case_label())},
         {"k", s.k()},
         {"A", s.bound()},
         {"T", s.horizon()},
         {"xi", s.xi()},
         {"threshold", case_threshold(s.k(), s.bound())},
         {"efficiency", s.efficiency()},
         {"efficiency_infinite", s.efficiency_infinite()},
         {"samples", {{"time", grid}, {"u1", u1}, {"u2", u2}}}};
  if (s.case_label() == FourLevelCase::II) {
    j["tau"] = s.tau();
    j["gamma1"] = s.gamma1();
    j["gamma2"] = s.gamma2();
    j["kappa"] = s.kappa();
    j["hold_length"] = s.hold_length();
    j["residual"] = s.residual();
  }
  return j;
}

inline json to_json(const PathWitness& w) {
  json segs = json::array();
  for (const auto& s : w.segments) segs.push_back({{"type", to_string(s.type)}, {"nodes", s.nodes}});
  return {{"nodes", w.nodes}, {"segments", std::move(segs)}};
}

inline json to_json(const ControllabilityReport& r) {
  json w = json::array();
  for (std::size_t i = 0; i < r.pairs.size(); ++i)
    w.push_back({{"pair", {r.pairs[i].first, r.pairs[i].second}}, {"path", to_json(r.witnesses[i])}});
  json j{{"controllable", r.controllable}, {"witnesses", std::move(w)}};
  j["counterexample"] = r.counterexample ? json{r.counterexample->first, r.counterexample->second} : json(nullptr);
  return j;
}

inline json to_json(const CouplingGraph& g) {
  json nodes = json::array();
  for (int id : g.nodes()) nodes.push_back({{"id", id}, {"decay", g.decay_rate(id)}});
  json edges = json::array();
  for (auto [a, b] : g.edges()) edges.push_back({a, b});
  return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}, {"subspace", g.subspace()}};
}

// Nodes carry either a boolean "decays" flag or a non-negative "decay" rate.
inline CouplingGraph coupling_graph_from_json(const json& j) {
  detail::require_keys(j, {"nodes", "edges", "subspace"}, "graph");
  CouplingGraph g;
  for (const auto& n : j.at("nodes")) {
    detail::require_keys(n, {"id", "decay", "decays"}, "graph node");
    double rate = 0.0;
    if (n.contains("decay")) rate = n.at("decay").get<double>();
    if (n.contains("decays")) {
      detail::require(!n.contains("decay"), "graph node sets both 'decay' and 'decays'");
      rate = n.at("decays").get<bool>() ? 1.0 : 0.0;
    }
    g.add_node(n.at("id").get<int>(), rate);
  }
  for (const auto& e : j.at("edges")) {
    detail::require(e.is_array() && e.size() == 2, "edges must be pairs of node ids");
    g.add_edge(e[0].get<int>(), e[1].get<int>());
  }
  g.set_subspace(j.at("subspace").get<std::vector<int>>());
  return g;
}

// ---- files ---------------------------------------------------------------

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Writes via a temporary file in the same directory and renames it over the target.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += fmt::format(".tmp.{}", static_cast<long>(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw contract_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace relaxfree
