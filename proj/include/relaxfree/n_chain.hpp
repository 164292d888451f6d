#pragma once
// Longer chains: reduction of a trailing decaying/stable pair, efficiency
// bounds, and controllability of relaxation-free subspaces from topology.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "relaxfree/errors.hpp"
#include "relaxfree/four_level.hpp"
#include "relaxfree/model.hpp"

namespace relaxfree {

// Undirected simple graph of levels. Decay rates are kept for reference;
// controllability only looks at whether a rate is non-zero.
class CouplingGraph {
 public:
  void add_node(int id, double decay_rate = 0.0) {
    detail::require(std::isfinite(decay_rate) && decay_rate >= 0, "decay rate must be finite and non-negative");
    detail::require(!nodes_.contains(id), "duplicate node " + std::to_string(id));
    nodes_[id] = decay_rate;
    adj_[id];
  }
  void add_edge(int a, int b) {
    detail::require(a != b, "self-loop on node " + std::to_string(a));
    detail::require(nodes_.contains(a) && nodes_.contains(b),
                    "edge (" + std::to_string(a) + "," + std::to_string(b) + ") names an unknown node");
    detail::require(!adj_[a].contains(b), "duplicate edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
    adj_[a].insert(b);
    adj_[b].insert(a);
  }
  void set_subspace(std::vector<int> s) {
    std::sort(s.begin(), s.end());
    detail::require(std::adjacent_find(s.begin(), s.end()) == s.end(), "duplicate node in subspace");
    for (int v : s) detail::require(nodes_.contains(v), "subspace names unknown node " + std::to_string(v));
    subspace_ = std::move(s);
  }

  bool has_node(int id) const { return nodes_.contains(id); }
  bool decays(int id) const { return nodes_.at(id) > 0; }
  double decay_rate(int id) const { return nodes_.at(id); }
  std::vector<int> nodes() const {
    std::vector<int> out;
    for (const auto& [id, _] : nodes_) out.push_back(id);
    return out;
  }
  const std::set<int>& neighbors(int id) const { return adj_.at(id); }
  bool has_edge(int a, int b) const { return adj_.contains(a) && adj_.at(a).contains(b); }
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (const auto& [a, ns] : adj_)
      for (int b : ns)
        if (a < b) out.emplace_back(a, b);
    return out;
  }
  const std::vector<int>& subspace() const noexcept { return subspace_; }

  void validate() const {
    detail::require(!subspace_.empty(), "subspace S is empty");
    for (int v : subspace_)
      detail::require(!decays(v), "subspace node " + std::to_string(v) + " is flagged as decaying");
  }

  friend bool operator==(const CouplingGraph&, const CouplingGraph&) = default;

 private:
  std::map<int, double> nodes_;
  std::map<int, std::set<int>> adj_;
  std::vector<int> subspace_;
};

enum class SegmentType { I, II };

inline const char* to_string(SegmentType t) { return t == SegmentType::I ? "I" : "II"; }

struct PathSegment {
  SegmentType type = SegmentType::I;
  std::vector<int> nodes;
  friend bool operator==(const PathSegment&, const PathSegment&) = default;
};

struct PathWitness {
  std::vector<int> nodes;
  std::vector<PathSegment> segments;
  friend bool operator==(const PathWitness&, const PathWitness&) = default;
};

// Splits an admissible path into maximal decay-free runs (type I) and
// stable-decaying-stable triples (type II).
inline std::vector<PathSegment> classify_segments(const CouplingGraph& g, const std::vector<int>& path) {
  std::vector<PathSegment> out;
  PathSegment run{SegmentType::I, {}};
  for (std::size_t i = 0; i < path.size(); ++i) {
    const int v = path[i];
    if (!g.decays(v)) {
      run.nodes.push_back(v);
      continue;
    }
    detail::require(i > 0 && i + 1 < path.size() && !g.decays(path[i - 1]) && !g.decays(path[i + 1]),
                    "path is not admissible");
    if (run.nodes.size() >= 2) out.push_back(run);
    out.push_back({SegmentType::II, {path[i - 1], v, path[i + 1]}});
    run.nodes.clear();
  }
  if (run.nodes.size() >= 2) out.push_back(run);
  return out;
}

// Shortest path from source to target that never steps between two decaying
// nodes; ties go to the lexicographically smallest node sequence. The search
// runs on (node, current-node-decays) states, where the flag forbids a
// decaying successor; since the flag is a function of the node this is a BFS
// on the graph with decaying-decaying edges removed.
inline std::optional<PathWitness> admissible_path_search(const CouplingGraph& g, int source, int target) {
  detail::require(g.has_node(source) && g.has_node(target), "source or target is not a node");
  auto allowed = [&](int a, int b) { return !(g.decays(a) && g.decays(b)); };
  // Distances to target, then greedy smallest-next walk from source.
  std::map<int, int> dist;
  std::deque<int> queue{target};
  dist[target] = 0;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int w : g.neighbors(v))
      if (allowed(v, w) && !dist.contains(w)) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
  }
  if (!dist.contains(source)) return std::nullopt;
  PathWitness pw;
  int v = source;
  pw.nodes.push_back(v);
  while (v != target) {
    for (int w : g.neighbors(v))
      if (allowed(v, w) && dist.contains(w) && dist[w] == dist[v] - 1) {
        v = w;
        break;
      }
    pw.nodes.push_back(v);
  }
  pw.segments = classify_segments(g, pw.nodes);
  return pw;
}

struct ControllabilityReport {
  bool controllable = false;
  std::vector<std::pair<int, int>> pairs;  // pairs with a witness, lexicographic
  std::vector<PathWitness> witnesses;
  std::optional<std::pair<int, int>> counterexample;
};

inline ControllabilityReport is_controllable(const CouplingGraph& g) {
  g.validate();
  ControllabilityReport rep;
  const auto& s = g.subspace();
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      auto w = admissible_path_search(g, s[i], s[j]);
      if (!w) {
        rep.counterexample = std::make_pair(s[i], s[j]);
        rep.controllable = false;
        return rep;
      }
      rep.pairs.emplace_back(s[i], s[j]);
      rep.witnesses.push_back(std::move(*w));
    }
  rep.controllable = true;
  return rep;
}

// Merges the last two levels of a chain whose last level is stable and
// second-to-last decays: y = sqrt(x_{n-1}^2 + x_n^2), theta = atan2(x_n, x_{n-1}).
// The merged level couples through Omega cos(theta) and decays at k cos^2(theta);
// since y >= x_n, any efficiency reached on the original chain is reached by
// y on the reduced one.
class ReducedChain {
 public:
  explicit ReducedChain(const ChainSystem& sys) : orig_(sys), reduced_(make_reduced(sys)) {}

  const ChainSystem& original() const noexcept { return orig_; }
  // Worst case theta = 0: the merged level carries the full decay.
  const ChainSystem& reduced() const noexcept { return reduced_; }

  static double mixing_angle(const RealState& x) {
    const Eigen::Index n = x.size();
    return std::atan2(x(n - 1), x(n - 2));
  }
  static RealState reduce_state(const RealState& x) {
    const Eigen::Index n = x.size();
    RealState y = x.head(n - 1);
    y(n - 2) = std::hypot(x(n - 2), x(n - 1));
    return y;
  }
  // Generator of the reduced variables for original couplings `omega` and angle theta.
  Eigen::MatrixXd generator(std::span<const double> omega, double theta) const {
    const std::size_t n = orig_.levels();
    detail::require(omega.size() == n - 1, "control count does not match coupling count");
    std::vector<double> eff(omega.begin(), omega.end() - 1);
    eff.back() *= std::cos(theta);
    std::vector<double> rates = orig_.decay_rates();
    rates.pop_back();
    rates.back() *= std::cos(theta) * std::cos(theta);
    ChainSystem tmp(std::move(rates), orig_.bound(), {});
    return build_real_generator(tmp, eff);
  }

 private:
  static ChainSystem make_reduced(const ChainSystem& sys) {
    const std::size_t n = sys.levels();
    detail::require(n >= 4, "reduction needs at least 4 levels");
    detail::require(sys.decay(n - 1) == 0.0, "last level must be stable");
    detail::require(sys.decay(n - 2) > 0.0, "second-to-last level must decay");
    std::vector<double> rates = sys.decay_rates();
    rates.pop_back();
    std::vector<std::size_t> bounded;
    for (std::size_t c : sys.bounded_couplings())
      if (c + 1 < n - 1) bounded.push_back(c);
    return ChainSystem(std::move(rates), sys.bound(), std::move(bounded));
  }

  ChainSystem orig_;
  ChainSystem reduced_;
};

inline ReducedChain reduce_chain(const ChainSystem& sys) { return ReducedChain(sys); }

// Infinite-time efficiency bound for a chain with `run` consecutive decaying
// intermediates, all at rate xi * A.
inline double chain_efficiency_upper_bound(int run, double xi) {
  detail::require(run >= 0, "run length must be non-negative");
  detail::require(std::isfinite(xi) && xi >= 0, "xi must be finite and non-negative");
  return run <= 1 ? 1.0 : asymptotic_efficiency(xi);
}

}  // namespace relaxfree
