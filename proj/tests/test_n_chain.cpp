#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "relaxfree/n_chain.hpp"

using namespace relaxfree;

namespace {

CouplingGraph make_graph(const std::vector<int>& stable, const std::vector<int>& decaying,
                         const std::vector<std::pair<int, int>>& edges, std::vector<int> s) {
  CouplingGraph g;
  for (int v : stable) g.add_node(v, 0.0);
  for (int v : decaying) g.add_node(v, 1.0);
  for (auto [a, b] : edges) g.add_edge(a, b);
  g.set_subspace(std::move(s));
  return g;
}

CouplingGraph fig_a() {
  return make_graph({1, 2, 3, 4}, {5, 6, 7}, {{1, 5}, {5, 2}, {2, 3}, {3, 6}, {6, 4}, {6, 7}}, {1, 2, 3, 4});
}
CouplingGraph fig_b() {
  return make_graph({1, 2, 3, 4}, {5, 6, 7, 8}, {{1, 5}, {5, 2}, {2, 3}, {3, 6}, {6, 7}, {7, 8}, {8, 4}},
                    {1, 2, 3, 4});
}

bool admissible(const CouplingGraph& g, const std::vector<int>& p) {
  std::set<int> seen;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!seen.insert(p[i]).second) return false;
    if (i > 0 && (!g.has_edge(p[i - 1], p[i]) || (g.decays(p[i - 1]) && g.decays(p[i])))) return false;
  }
  return true;
}

}  // namespace

TEST(Topology, ReferenceGraphs) {
  const auto a = is_controllable(fig_a());
  EXPECT_TRUE(a.controllable);
  EXPECT_EQ(a.pairs.size(), 6u);
  EXPECT_FALSE(a.counterexample);
  const auto b = is_controllable(fig_b());
  EXPECT_FALSE(b.controllable);
  ASSERT_TRUE(b.counterexample);
  EXPECT_EQ(*b.counterexample, std::make_pair(1, 4));
}

TEST(Topology, WitnessSegments) {
  const auto w = admissible_path_search(fig_a(), 1, 4);
  ASSERT_TRUE(w);
  EXPECT_EQ(w->nodes, (std::vector<int>{1, 5, 2, 3, 6, 4}));
  ASSERT_EQ(w->segments.size(), 3u);
  EXPECT_EQ(w->segments[0].type, SegmentType::II);
  EXPECT_EQ(w->segments[0].nodes, (std::vector<int>{1, 5, 2}));
  EXPECT_EQ(w->segments[1].type, SegmentType::I);
  EXPECT_EQ(w->segments[1].nodes, (std::vector<int>{2, 3}));
  EXPECT_EQ(w->segments[2].nodes, (std::vector<int>{3, 6, 4}));
  EXPECT_THROW(classify_segments(fig_b(), {3, 6, 7}), contract_error);
}

TEST(Topology, TieBreakIsLexicographic) {
  const auto g = make_graph({1, 2, 3, 4}, {}, {{1, 3}, {1, 2}, {2, 4}, {3, 4}}, {1, 4});
  EXPECT_EQ(admissible_path_search(g, 1, 4)->nodes, (std::vector<int>{1, 2, 4}));
}

TEST(Topology, GraphErrors) {
  CouplingGraph g;
  g.add_node(1);
  EXPECT_THROW(g.add_node(1), contract_error);
  EXPECT_THROW(g.add_node(2, -1.0), contract_error);
  g.add_node(2, 0.5);
  EXPECT_THROW(g.add_edge(1, 1), contract_error);
  EXPECT_THROW(g.add_edge(1, 9), contract_error);
  g.add_edge(1, 2);
  EXPECT_THROW(g.add_edge(2, 1), contract_error);
  EXPECT_THROW(g.set_subspace({1, 1}), contract_error);
  EXPECT_THROW(g.set_subspace({7}), contract_error);
  EXPECT_THROW(is_controllable(g), contract_error);  // empty subspace
  g.set_subspace({1, 2});
  EXPECT_THROW(is_controllable(g), contract_error);  // decaying node in S
}

TEST(Topology, RandomGraphsAgainstExhaustiveSearch) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int positive = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 11);
    const double p = 0.15 + 0.4 * u(rng);
    CouplingGraph g;
    std::set<int> decaying;
    std::vector<int> stable;
    for (int v = 1; v <= n; ++v) {
      const bool d = u(rng) < 0.45;
      g.add_node(v, d ? 1.0 : 0.0);
      if (d) decaying.insert(v);
      else stable.push_back(v);
    }
    std::map<int, std::set<int>> adj;
    for (int v = 1; v <= n; ++v) adj[v];
    for (int a = 1; a <= n; ++a)
      for (int b = a + 1; b <= n; ++b)
        if (u(rng) < p) {
          g.add_edge(a, b);
          adj[a].insert(b);
          adj[b].insert(a);
        }
    if (stable.size() < 2) continue;
    g.set_subspace(stable);
    bool all = true;
    for (std::size_t i = 0; i < stable.size(); ++i)
      for (std::size_t j = i + 1; j < stable.size(); ++j) {
        const int len = oracle::shortest_admissible(adj, decaying, stable[i], stable[j]);
        const auto w = admissible_path_search(g, stable[i], stable[j]);
        ASSERT_EQ(len >= 0, w.has_value());
        if (w) {
          EXPECT_EQ(static_cast<int>(w->nodes.size()), len);
          EXPECT_TRUE(admissible(g, w->nodes));
          EXPECT_EQ(w->nodes.front(), stable[i]);
          EXPECT_EQ(w->nodes.back(), stable[j]);
        }
        all = all && len >= 0;
      }
    EXPECT_EQ(is_controllable(g).controllable, all);
    positive += all;
  }
  EXPECT_GT(positive, 20);
}

TEST(Reduction, GeneratorMatchesChainRule) {
  const ChainSystem sys = ChainSystem::chain(5, 0.8, 1.0);
  const ReducedChain red(sys);
  EXPECT_EQ(red.reduced().levels(), 4u);
  EXPECT_EQ(red.reduced().decay_rates(), (std::vector<double>{0, 0.8, 0.8, 0.8}));
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    RealState x(5);
    for (int j = 0; j < 5; ++j) x(j) = d(g);
    const std::vector<double> om{d(g), d(g), d(g), d(g)};
    const Eigen::VectorXd dx = build_real_generator(sys, om) * x;
    const RealState y = ReducedChain::reduce_state(x);
    // d/dt of y = (x1, x2, x3, hypot(x4, x5)).
    Eigen::VectorXd dy = dx.head(4);
    dy(3) = (x(3) * dx(3) + x(4) * dx(4)) / y(3);
    const Eigen::VectorXd pred = red.generator(om, std::atan2(x(4), x(3))) * y;
    EXPECT_LT((pred - dy).norm(), 1e-12);
    EXPECT_GE(y(3), std::abs(x(4)));
  }
  EXPECT_THROW(reduce_chain(ChainSystem::lambda(1, 1)), contract_error);
}

TEST(Reduction, ChainBound) {
  EXPECT_EQ(chain_efficiency_upper_bound(0, 1.0), 1.0);
  EXPECT_EQ(chain_efficiency_upper_bound(1, 1.0), 1.0);
  EXPECT_NEAR(chain_efficiency_upper_bound(2, 1.0), std::sqrt(2.0) - 1, 1e-15);
  EXPECT_NEAR(chain_efficiency_upper_bound(3, 1.0), std::sqrt(2.0) - 1, 1e-15);
  EXPECT_THROW(chain_efficiency_upper_bound(-1, 1.0), contract_error);
}
