#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "relaxfree/propagator.hpp"
#include "relaxfree/three_level.hpp"

using namespace relaxfree;

namespace {
// Optimal efficiency by RK4 on the polar system, split at the switch.
double rk4_efficiency(const ThreeLevelSolution& s, const std::function<double(double)>& u, int n = 20000) {
  const double ts = s.ramp_end();
  std::array<double, 2> r{1.0, 0.0};
  if (ts > 0) r = oracle::polar3(s.k(), s.bound(), u, 0.0, ts, r, n);
  if (ts < s.horizon()) r = oracle::polar3(s.k(), s.bound(), u, ts, s.horizon(), r, n);
  return r[1];
}
}  // namespace

TEST(CriticalTime, FrozenValues) {
  EXPECT_NEAR(critical_time(10, 10), 0.0604599788078, 1e-12);
  EXPECT_NEAR(critical_time(1, 1), 0.604599788078, 1e-12);
  EXPECT_NEAR(critical_time(3, 1), 0.22697189138, 1e-10);
  EXPECT_DOUBLE_EQ(critical_time(2, 1), 1.0 / 3.0);
}

TEST(CriticalTime, BranchesAgreeWithRootFinding) {
  std::mt19937_64 g(21);
  std::uniform_real_distribution<double> d(0.05, 10.0);
  for (int i = 0; i < 200; ++i) {
    const double k = d(g), a = d(g);
    EXPECT_NEAR(critical_time(k, a), critical_time_by_root(k, a), 1e-9 * critical_time(k, a)) << k << " " << a;
  }
  // Continuous across k = 2A, and scales as 1/A.
  EXPECT_NEAR(critical_time(2 + 1e-7, 1), 1.0 / 3.0, 1e-7);
  EXPECT_NEAR(critical_time(2 - 1e-7, 1), 1.0 / 3.0, 1e-7);
  EXPECT_NEAR(critical_time(6, 3), critical_time(2, 1) / 3, 1e-15);
  EXPECT_NEAR(critical_time(0.0, 1.0), std::numbers::pi / 2, 1e-14);
}

TEST(Adjoint, SatisfiesCostateEquation) {
  for (auto [k, a] : {std::pair{1.0, 1.0}, {5.0, 1.0}, {2.0, 1.0}, {0.3, 2.0}}) {
    const BackwardAdjoint adj(k, a, 7.0);
    const auto l0 = adj.elapsed(0.0);
    EXPECT_NEAR(l0[0], 0.0, 1e-15);
    EXPECT_GT(l0[1], 0.0);
    // d lambda / ds = M^T lambda with M = [[-k, -A], [A, 0]].
    for (double s : {0.05, 0.2, 0.4}) {
      const double h = 1e-6;
      const auto p = adj.elapsed(s + h), m = adj.elapsed(s - h), l = adj.elapsed(s);
      EXPECT_NEAR((p[0] - m[0]) / (2 * h), -k * l[0] + a * l[1], 1e-6 * (1 + std::abs(l[0])));
      EXPECT_NEAR((p[1] - m[1]) / (2 * h), -a * l[0], 1e-6 * (1 + std::abs(l[1])));
      EXPECT_NEAR(adj.ratio_elapsed(s), l[1] / l[0], 1e-9 * std::abs(l[1] / l[0]));
    }
  }
  EXPECT_EQ(backward_adjoint(5, 1, 1).branch(), AdjointBranch::hyperbolic);
  EXPECT_EQ(backward_adjoint(1, 1, 1).branch(), AdjointBranch::trigonometric);
  EXPECT_EQ(backward_adjoint(2, 1, 1).branch(), AdjointBranch::degenerate);
}

TEST(ThreeLevel, FrozenEfficiencies) {
  const std::array<std::array<double, 3>, 5> rows{{{2, 0.698689320987, 1.69429031625},
                                                   {5, 0.843938493271, 4.84332256647},
                                                   {10, 0.912653777298, 9.91254473162},
                                                   {20, 0.953429319683, 19.9534126639},
                                                   {100, 0.990147224938, 99.9901470659}}};
  for (const auto& [T, eff, tau] : rows) {
    const ThreeLevelSolution s(1, 1, T);
    EXPECT_EQ(s.case_label(), ThreeLevelCase::switched);
    EXPECT_NEAR(s.efficiency(), eff, 1e-11) << T;
    EXPECT_NEAR(s.tau(), tau, 1e-9) << T;
  }
}

TEST(ThreeLevel, EfficiencyMatchesReferenceIntegration) {
  for (auto [k, a, T] : std::vector<std::array<double, 3>>{{1, 1, 5}, {5, 1, 3}, {0.2, 2, 4}, {10, 10, 0.05}, {1, 1, 0.3}}) {
    const ThreeLevelSolution s(k, a, T);
    EXPECT_NEAR(rk4_efficiency(s, [&](double t) { return s.u(t); }), s.efficiency(), 1e-10) << k << " " << T;
  }
}

TEST(ThreeLevel, LocalPerturbationsDoNotHelp) {
  const ThreeLevelSolution s(1, 1, 5);
  const double best = rk4_efficiency(s, [&](double t) { return s.u(t); }, 4000);
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    const double c = d(g), w = 2 + 3 * std::abs(d(g)), ph = 3 * d(g), eps = 0.05 * d(g);
    auto u = [&](double t) { return std::clamp(s.u(t) + eps * c * std::sin(w * t + ph), 0.0, 1.0); };
    EXPECT_LE(rk4_efficiency(s, u, 4000), best + 1e-9);
  }
}

TEST(ThreeLevel, RampInvariants) {
  for (auto [k, a, T] : std::vector<std::array<double, 3>>{{1, 1, 10}, {5, 1, 3}, {0.5, 2, 6}}) {
    const ThreeLevelSolution s(k, a, T);
    const double tau = s.tau();
    for (int i = 0; i < 20; ++i) {
      const double t = tau * i / 20.0;
      const double A = s.a(t), B = s.b(t);
      EXPECT_NEAR((A + B) / (A - B), a * a / k * t + 1, 1e-10 * (a * a / k * t + 1));
      // u = b / (A t) on the ramp (b = A t u).
      if (t > 0) EXPECT_NEAR(B, a * t * s.u(t), 1e-12 * (1 + B));
    }
    EXPECT_NEAR(s.a(tau), a * tau + 2 * k / a, 1e-8);
    EXPECT_NEAR(s.a(std::nextafter(tau, 0.0)), s.a(tau), 1e-8);
    EXPECT_NEAR(s.u(std::nextafter(tau, 0.0)), 1.0, 1e-7);
    // r(t) against forward integration.
    const auto r = oracle::polar3(k, a, [&](double t) { return s.u(t); }, 0.0, 0.5 * tau, {1, 0}, 20000);
    EXPECT_NEAR(s.r(0.5 * tau)[0], r[0], 1e-11);
    EXPECT_NEAR(s.r(0.5 * tau)[1], r[1], 1e-11);
  }
}

TEST(ThreeLevel, ShortTimeCase) {
  const ThreeLevelSolution s(10, 10, 0.05);
  EXPECT_EQ(s.case_label(), ThreeLevelCase::short_time);
  EXPECT_DOUBLE_EQ(s.tau(), 0.05);
  EXPECT_EQ(s.ramp_end(), 0.0);
  EXPECT_EQ(s.u0(), 1.0);
  EXPECT_EQ(s.u(0.01), 1.0);
  EXPECT_FALSE(switching_time(10, 10, 0.05));
  EXPECT_TRUE(switching_time(10, 10, 0.07));
  EXPECT_THROW(s.pump(0.01), contract_error);
  // Continuity at T = T_M.
  const double tm = critical_time(1, 1);
  EXPECT_NEAR(efficiency_bound(1, 1, tm * (1 + 1e-9)), efficiency_bound(1, 1, tm), 1e-8);
}

TEST(ThreeLevel, PumpClosedFormMatchesQuotient) {
  const ChainSystem sys = ChainSystem::lambda(1, 1);
  const ThreeLevelSolution s(1, 1, 5);
  OptimalU u{s};
  const auto pt = propagate_polar(sys, u, 5.0, 1e-12);
  const auto rc = reconstruct_full_controls(
      sys, pt, [&](double t) { return s.u(t); }, [&](double t) { return s.du(t); }, s.tau());
  for (double t : {0.0, 0.5, 1.0, 2.0, 3.0, 4.0}) EXPECT_NEAR(rc.pump(t), s.pump(t), 1e-7 * s.pump(t)) << t;
  EXPECT_NEAR(*rc.cutoff_time(), s.cutoff_time(1e4), 1e-8);
}

TEST(ThreeLevel, FullPropagationReachesBound) {
  for (auto [k, a, T] : std::vector<std::array<double, 3>>{{1, 1, 5}, {5, 1, 3}, {10, 10, 0.05}}) {
    const OptimalPulses p(ThreeLevelSolution(k, a, T));
    const auto tr = propagate(ChainSystem::lambda(k, a), p, ground_state(3), T, 1e-11);
    EXPECT_NEAR(tr.final_state()(2), p.solution().efficiency(), 1e-8) << k << " " << T;
    if (p.solution().ramp_end() > 0) EXPECT_NEAR(p.solution().pump(p.cutoff_time()), 1e4 * a, 1e-3 * a);
  }
}

TEST(ThreeLevel, RejectsBadParameters) {
  EXPECT_THROW(ThreeLevelSolution(-1, 1, 1), contract_error);
  EXPECT_THROW(ThreeLevelSolution(1, 0, 1), contract_error);
  EXPECT_THROW(ThreeLevelSolution(1, 1, 0), contract_error);
  EXPECT_THROW(critical_time(1, NAN), contract_error);
  EXPECT_THROW(ThreeLevelSolution(1, 1, 1).cutoff_time(0.0), contract_error);
}

TEST(Stirap, ScheduleShape) {
  const auto p = stirap_limit_pulses(1, 1, 20, std::numbers::pi / 2, 0.0);
  const auto& s = p.schedule;
  EXPECT_DOUBLE_EQ(s.duration(), 20.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_DOUBLE_EQ(s.values(1)[i], 1.0);
    if (i > 0) EXPECT_GE(s.values(0)[i], s.values(0)[i - 1]);
  }
  EXPECT_EQ(s.values(0).front(), 0.0);
  const auto q = stirap_limit_pulses(1, 1, 20, 0.3, 0.0, {2001, 2.0});
  EXPECT_NEAR(std::atan(q.schedule.value(0, q.protocol_end)), 0.3, 1e-12);
  EXPECT_EQ(q.schedule.values(1).front(), 0.0);
  EXPECT_EQ(q.schedule.values(0).back(), 0.0);
  EXPECT_DOUBLE_EQ(q.schedule.duration(), 24.0);
  EXPECT_THROW(stirap_limit_pulses(1, 1, 0.1, 1.0, 0.0), contract_error);
  EXPECT_THROW(stirap_limit_pulses(1, 1, 20, 2.0, 0.0), contract_error);
}
