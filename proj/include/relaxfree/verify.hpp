#pragma once
// Named adversarial suites: oracle results against the analytic optima.

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "relaxfree/errors.hpp"
#include "relaxfree/four_level.hpp"
#include "relaxfree/oracle.hpp"
#include "relaxfree/three_level.hpp"

namespace relaxfree {

struct VerifyOptions {
  std::size_t trials = 1000;
  std::size_t segments = 32;
  std::size_t ascents = 10;  // local ascents from random starts
  double slack = 1e-4;
  std::uint64_t seed = 1;
};

struct VerifyInstance {
  std::string name;
  double analytic = 0.0;
  double oracle = 0.0;
  double margin = 0.0;  // analytic - oracle
  bool passed = false;
};

struct VerifyReport {
  std::string suite;
  std::uint64_t seed = 0;
  bool passed = true;
  std::vector<VerifyInstance> instances;
};

// Best of: random search, ascent from its winner, ascents from random starts.
inline double oracle_best(const DiscretizedControlProblem& p, const VerifyOptions& o) {
  const SearchResult rs = random_search(p, o.trials, o.seed);
  double best = std::max(rs.best_efficiency, local_ascent(p, rs.best_values).efficiency);
  for (std::size_t i = 0; i < o.ascents; ++i) {
    auto g = detail::trial_rng(o.seed ^ 0xa5a5a5a5ULL, i);
    best = std::max(best, local_ascent(p, random_controls(p, g, 0)).efficiency);
  }
  return best;
}

namespace detail {
inline void add_instance(VerifyReport& r, std::string name, double analytic, double oracle, double slack) {
  VerifyInstance v{std::move(name), analytic, oracle, analytic - oracle, oracle <= analytic + slack};
  r.passed = r.passed && v.passed;
  r.instances.push_back(std::move(v));
}
}  // namespace detail

inline VerifyReport verify_three_level(const VerifyOptions& o) {
  VerifyReport r{"three-level", o.seed, true, {}};
  for (auto [k, a, T] : std::array<std::array<double, 3>, 3>{{{1, 1, 5}, {1, 1, 10}, {5, 1, 3}}}) {
    const auto p = DiscretizedControlProblem::three_level(k, a, T, o.segments);
    detail::add_instance(r, fmt::format("k={} A={} T={}", k, a, T), efficiency_bound(k, a, T), oracle_best(p, o),
                         o.slack);
  }
  return r;
}

// Letting the Stokes amplitude drop below A must not beat the pinned optimum.
inline VerifyReport verify_free_stokes(const VerifyOptions& o) {
  VerifyReport r{"free-stokes", o.seed, true, {}};
  for (auto [k, a, T] : std::array<std::array<double, 3>, 2>{{{1, 1, 5}, {5, 1, 3}}}) {
    const auto p = DiscretizedControlProblem::three_level(k, a, T, o.segments, true);
    detail::add_instance(r, fmt::format("k={} A={} T={} free Stokes", k, a, T), efficiency_bound(k, a, T),
                         oracle_best(p, o), o.slack);
  }
  return r;
}

inline VerifyReport verify_four_level(const VerifyOptions& o) {
  VerifyReport r{"four-level", o.seed, true, {}};
  for (auto [k, a, T] : std::array<std::array<double, 3>, 3>{{{1, 1, 0.4}, {1, 1, 2}, {1, 1, 20}}}) {
    const auto p = DiscretizedControlProblem::four_level(k, a, T, o.segments);
    detail::add_instance(r, fmt::format("k={} A={} T={}", k, a, T), four_level_efficiency(k, a, T),
                         oracle_best(p, o), o.slack);
  }
  return r;
}

// Five-level chain with three decaying intermediates against the four-level optimum.
inline VerifyReport verify_chain(const VerifyOptions& o) {
  VerifyReport r{"chain", o.seed, true, {}};
  for (auto [k, a, T] : std::array<std::array<double, 3>, 2>{{{1, 1, 5}, {1, 1, 20}}}) {
    const auto p = DiscretizedControlProblem::five_chain(k, a, T, o.segments);
    detail::add_instance(r, fmt::format("five-chain k={} A={} T={}", k, a, T), four_level_efficiency(k, a, T),
                         oracle_best(p, o), o.slack);
  }
  return r;
}

inline std::vector<std::string> verify_suite_names() {
  return {"three-level", "free-stokes", "four-level", "chain", "all"};
}

inline VerifyReport run_verify_suite(const std::string& suite, const VerifyOptions& o) {
  if (suite == "three-level") return verify_three_level(o);
  if (suite == "free-stokes") return verify_free_stokes(o);
  if (suite == "four-level") return verify_four_level(o);
  if (suite == "chain") return verify_chain(o);
  detail::require(suite == "all", "unknown verify suite '" + suite + "'");
  VerifyReport all{"all", o.seed, true, {}};
  for (const auto* s : {"three-level", "free-stokes", "four-level", "chain"}) {
    VerifyReport r = run_verify_suite(s, o);
    all.passed = all.passed && r.passed;
    for (auto& v : r.instances) {
      v.name = std::string(s) + ": " + v.name;
      all.instances.push_back(std::move(v));
    }
  }
  return all;
}

inline nlohmann::json to_json(const VerifyReport& r) {
  nlohmann::json inst = nlohmann::json::array();
  for (const auto& v : r.instances)
    inst.push_back({{"name", v.name}, {"analytic", v.analytic}, {"oracle", v.oracle}, {"margin", v.margin},
                    {"passed", v.passed}});
  return {{"suite", r.suite}, {"seed", r.seed}, {"passed", r.passed}, {"instances", std::move(inst)}};
}

}  // namespace relaxfree
