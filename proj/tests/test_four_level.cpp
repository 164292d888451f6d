#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "relaxfree/four_level.hpp"
#include "relaxfree/propagator.hpp"

using namespace relaxfree;

namespace {
double rk4_efficiency(const FourLevelSolution& s, const std::function<double(double)>& u1,
                      const std::function<double(double)>& u2, int n = 20000) {
  std::vector<double> cuts{0.0};
  if (s.tau() > 0) cuts.insert(cuts.end(), {s.tau(), s.horizon() - s.tau()});
  cuts.push_back(s.horizon());
  std::array<double, 2> r{1.0, 0.0};
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] > cuts[i]) r = oracle::polar4(s.k(), s.bound(), u1, u2, cuts[i], cuts[i + 1], r, n);
  return r[1];
}
double rk4_efficiency(const FourLevelSolution& s) {
  return rk4_efficiency(s, [&](double t) { return s.u1(t); }, [&](double t) { return s.u2(t); });
}
}  // namespace

TEST(FourLevel, FrozenValues) {
  const FourLevelSolution a(1, 1, 1), b(1, 1, 2);
  EXPECT_NEAR(a.efficiency(), 0.361302623099, 1e-11);
  EXPECT_NEAR(a.u0(), 0.476627691, 1e-8);
  EXPECT_NEAR(a.tau(), 0.4279981143, 1e-9);
  EXPECT_NEAR(b.efficiency(), 0.402132333571, 1e-11);
  EXPECT_NEAR(b.u0(), 0.2079100065, 1e-9);
  EXPECT_NEAR(b.tau(), 0.9850415403, 1e-9);
  EXPECT_NEAR(four_level_efficiency(1, 1, 5), 0.414042799828, 1e-11);
  EXPECT_NEAR(four_level_efficiency(1, 1, 10), 0.414213417374, 1e-11);
  EXPECT_NEAR(four_level_efficiency(1, 1, 50), std::sqrt(2.0) - 1, 1e-11);
}

TEST(FourLevel, Classification) {
  EXPECT_NEAR(case_threshold(1, 1), std::atan(0.5), 1e-15);
  EXPECT_NEAR(case_threshold(0, 2), std::numbers::pi / 4, 1e-15);
  EXPECT_EQ(classify_case(1, 1, 0.46), FourLevelCase::I);
  EXPECT_EQ(classify_case(1, 1, 0.47), FourLevelCase::II);
  EXPECT_EQ(classify_case(1, 1, case_threshold(1, 1)), FourLevelCase::I);
  EXPECT_THROW(case1_efficiency(1, 1, 1.0), contract_error);
  EXPECT_THROW(case2_solve(1, 1, 0.2), contract_error);
  EXPECT_THROW(FourLevelSolution(1, 1, -1), contract_error);
}

TEST(FourLevel, AsymptoteAndMonotonicity) {
  for (double xi : {0.0, 0.2, 1.0, 5.0}) {
    EXPECT_NEAR(asymptotic_efficiency(xi), std::sqrt(1 + xi * xi) - xi, 1e-15);
    double prev = 0;
    for (double T = 0.05; T < 40; T *= 1.3) {
      const double e = four_level_efficiency(xi, 1, T);
      EXPECT_GE(e, prev - 1e-14) << xi << " " << T;
      EXPECT_LE(e, asymptotic_efficiency(xi) + 1e-14);
      prev = e;
    }
  }
  EXPECT_NEAR(four_level_efficiency(0, 1, 3), 1.0, 1e-12);
}

TEST(FourLevel, EfficiencyMatchesReferenceIntegration) {
  std::mt19937_64 g(17);
  std::uniform_real_distribution<double> d(0.1, 3.0);
  for (int i = 0; i < 12; ++i) {
    const double k = d(g), a = d(g), T = 3 * d(g) / a;
    const FourLevelSolution s(k, a, T);
    EXPECT_NEAR(rk4_efficiency(s), s.efficiency(), 1e-9) << k << " " << a << " " << T;
    EXPECT_NEAR(s.residual(), 0.0, 1e-12);
    EXPECT_NEAR(s.u2(0.3 * T), s.u1(0.7 * T), 1e-15);
  }
}

TEST(FourLevel, CaseOneClosedForm) {
  for (double T : {0.1, 0.3, 0.45}) {
    const FourLevelSolution s(1, 1, T);
    EXPECT_EQ(s.case_label(), FourLevelCase::I);
    EXPECT_DOUBLE_EQ(s.efficiency(), case1_efficiency(1, 1, T));
    const auto r = oracle::polar4(1, 1, [](double) { return 1.0; }, [](double) { return 1.0; }, 0, T, {1, 0}, 5000);
    EXPECT_NEAR(r[1], s.efficiency(), 1e-12);
  }
}

TEST(FourLevel, PhaseOneRatioMatchesForwardIntegration) {
  const FourLevelSolution s(0.7, 1.2, 3.0);
  const double t = 0.6 * s.tau();
  const auto r = oracle::polar4(0.7, 1.2, [&](double x) { return s.u1(x); }, [](double) { return 1.0; }, 0, t, {1, 0},
                                20000);
  EXPECT_NEAR(r[1] / r[0], s.b(t), 1e-10);
  const double h = 1e-6;
  EXPECT_NEAR((s.u1(t + h) - s.u1(t - h)) / (2 * h), s.du1(t), 1e-7);
  EXPECT_NEAR(s.u1(std::nextafter(s.tau(), 0.0)), 1.0, 1e-12);
}

TEST(FourLevel, LocalPerturbationsDoNotHelp) {
  for (double T : {0.4, 2.0}) {
    const FourLevelSolution s(1, 1, T);
    const double best = rk4_efficiency(s);
    std::mt19937_64 g(8);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int i = 0; i < 20; ++i) {
      const double w = 2 + 4 * std::abs(d(g)), ph = 3 * d(g), e1 = 0.05 * d(g), e2 = 0.05 * d(g);
      auto u1 = [&](double t) { return std::clamp(s.u1(t) + e1 * std::sin(w * t + ph), 0.0, 1.0); };
      auto u2 = [&](double t) { return std::clamp(s.u2(t) + e2 * std::cos(w * t - ph), 0.0, 1.0); };
      EXPECT_LE(rk4_efficiency(s, u1, u2, 4000), best + 1e-9) << T;
    }
  }
}

TEST(FourLevel, FullPropagationReachesBound) {
  for (auto [k, T] : std::vector<std::pair<double, double>>{{1, 1}, {1, 2}, {1, 0.4}, {0.3, 5}}) {
    const FourLevelPulses p(FourLevelSolution(k, 1, T));
    const auto tr = propagate(ChainSystem::four_level(k, 1), p, ground_state(4), T, 1e-11);
    EXPECT_NEAR(tr.final_state()(3), p.solution().efficiency(), 1e-8) << k << " " << T;
    for (const auto& pop : tr.populations) EXPECT_LE(pop[1] + pop[2], 1.0 + 1e-9);
  }
}

TEST(FourLevel, PulseSymmetry) {
  const FourLevelPulses p(FourLevelSolution(1, 1, 2));
  std::vector<double> a(3), b(3);
  for (double t : {0.1, 0.5, 0.9}) {
    p.evaluate(t, a);
    p.evaluate(2 - t, b);
    EXPECT_NEAR(a[0], b[2], 1e-9 * (1 + a[0]));
    EXPECT_DOUBLE_EQ(a[1], 1.0);
  }
  const double mid = 0.5 * (p.cutoff_time() + p.solution().tau());
  EXPECT_TRUE(p.flagged_at(0, mid));
  EXPECT_FALSE(p.flagged_at(0, 0.1));
  EXPECT_FALSE(p.flagged_at(0, 1.0));
  EXPECT_TRUE(p.flagged_at(2, 2 - mid));
  EXPECT_FALSE(p.flagged_at(2, 1.0));
}
