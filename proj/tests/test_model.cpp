#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "relaxfree/model.hpp"

using namespace relaxfree;

TEST(ChainSystem, Factories) {
  const auto l = ChainSystem::lambda(2.0, 0.5);
  EXPECT_EQ(l.levels(), 3u);
  EXPECT_EQ(l.couplings(), 2u);
  EXPECT_DOUBLE_EQ(l.decay(1), 2.0);
  EXPECT_TRUE(l.is_bounded(1));
  EXPECT_FALSE(l.is_bounded(0));
  EXPECT_TRUE(l.transfer_problem());
  EXPECT_DOUBLE_EQ(l.xi(), 4.0);
  EXPECT_EQ(l.coupling_names(), (std::vector<std::string>{"omega_p", "omega_s"}));

  const auto f = ChainSystem::four_level(1.0, 1.0);
  EXPECT_EQ(f.decay_rates(), (std::vector<double>{0, 1, 1, 0}));
  EXPECT_EQ(f.coupling_names(), (std::vector<std::string>{"omega_p", "omega_i", "omega_s"}));
  EXPECT_EQ(f.bounded_couplings(), (std::vector<std::size_t>{1}));

  const auto c = ChainSystem::chain(5, 1.0, 1.0);
  EXPECT_EQ(c.bounded_couplings(), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(c.coupling_names().back(), "omega_s");
  EXPECT_EQ(c.coupling_names()[1], "omega_i1");
}

TEST(ChainSystem, RejectsBadInput) {
  EXPECT_THROW(ChainSystem({0.0}, 1.0, {}), contract_error);
  EXPECT_THROW(ChainSystem({0.0, -1.0, 0.0}, 1.0, {}), contract_error);
  EXPECT_THROW(ChainSystem({0.0, 1.0, 0.0}, 0.0, {}), contract_error);
  EXPECT_THROW(ChainSystem({0.0, 1.0, 0.0}, 1.0, {2}), contract_error);
  EXPECT_THROW(ChainSystem({0.0, NAN, 0.0}, 1.0, {}), contract_error);
  EXPECT_NO_THROW(ChainSystem::lambda(0.0, 1.0));
}

TEST(Generator, TridiagonalStructure) {
  const ChainSystem s({0.0, 0.7, 0.3, 0.0}, 1.0, {1});
  const std::vector<double> om{1.5, -0.25, 2.0};
  const auto m = build_real_generator(s, om);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      if (i == j) EXPECT_DOUBLE_EQ(m(i, j), -s.decay(i));
      else if (i == j + 1) EXPECT_DOUBLE_EQ(m(i, j), om[j]);
      else if (j == i + 1) EXPECT_DOUBLE_EQ(m(i, j), -om[i]);
      else EXPECT_EQ(m(i, j), 0.0);
    }
  // Off-diagonal part is antisymmetric: it conserves the norm.
  const Eigen::MatrixXd off = m - Eigen::MatrixXd(m.diagonal().asDiagonal());
  EXPECT_LT((off + off.transpose()).norm(), 1e-15);
  EXPECT_THROW(build_real_generator(s, std::vector<double>{1.0}), contract_error);
}

TEST(Polar, RoundTrip) {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    for (std::size_t n : {3u, 4u}) {
      RealState x(static_cast<Eigen::Index>(n));
      for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = d(g);
      const auto p = to_polar(x);
      EXPECT_NEAR(p.u1() * p.r1, x(1), 1e-14);
      EXPECT_LT((from_polar(p, n) - x).norm(), 1e-14);
    }
  }
  RealState z = RealState::Zero(4);
  z(0) = 0.0;
  const auto p = to_polar(z);
  EXPECT_EQ(p.theta1, 0.0);
  EXPECT_EQ(p.theta2, 0.0);
  EXPECT_THROW(to_polar(RealState::Zero(5)), contract_error);
}

TEST(HardPulse, RotatesAndEmpties) {
  RealState x(3);
  x << 1.0, 0.0, 0.0;
  HardPulse{0.0, 0, std::numbers::pi / 6}.apply(x);
  EXPECT_NEAR(x(0), std::cos(std::numbers::pi / 6), 1e-15);
  EXPECT_NEAR(x(1), 0.5, 1e-15);
  HardPulse{0.0, 0, std::nullopt}.apply(x);
  EXPECT_EQ(x(0), 0.0);
  EXPECT_NEAR(x(1), 1.0, 1e-15);
  x << 0.3, -0.4, 0.5;
  const double n0 = x.norm();
  HardPulse{0.0, 1, std::nullopt}.apply(x);
  EXPECT_EQ(x(1), 0.0);
  EXPECT_NEAR(x.norm(), n0, 1e-15);
}

TEST(ControlSchedule, Validation) {
  EXPECT_THROW(ControlSchedule({0.0}, {"a"}, {{1.0}}, Interpolation::linear), contract_error);
  EXPECT_THROW(ControlSchedule({0.1, 1.0}, {"a"}, {{1.0, 1.0}}, Interpolation::linear), contract_error);
  EXPECT_THROW(ControlSchedule({0.0, 1.0, 1.0}, {"a"}, {{1, 1, 1}}, Interpolation::linear), contract_error);
  EXPECT_THROW(ControlSchedule({0.0, 1.0}, {"a"}, {{1.0}}, Interpolation::linear), contract_error);
  EXPECT_THROW(ControlSchedule({0.0, 1.0}, {"a"}, {{1.0, INFINITY}}, Interpolation::linear), contract_error);
  ControlSchedule s({0.0, 1.0, 2.0}, {"p", "s"}, {{0.0, 2.0, 0.0}, {1.0, 1.0, 1.0}}, Interpolation::linear);
  EXPECT_THROW(s.set_bound(0, 1.0), contract_error);
  EXPECT_NO_THROW(s.set_bound(1, 1.0));
  EXPECT_THROW(s.set_flags(0, {0, 1, 0}), contract_error);
  EXPECT_NO_THROW(s.set_flags(0, {1, 0, 1}));
  EXPECT_THROW(s.add_hard_pulse({3.0, 0, std::nullopt}), contract_error);
  EXPECT_THROW(s.add_hard_pulse({1.0, 2, std::nullopt}), contract_error);
  s.add_hard_pulse({2.0, 0, std::nullopt});
  s.add_hard_pulse({0.5, 1, 0.1});
  EXPECT_DOUBLE_EQ(s.hard_pulses().front().time, 0.5);
  EXPECT_THROW(s.set_decay_scale({1.0, -1.0, 1.0}), contract_error);
  EXPECT_EQ(s.channel_index("s"), 1u);
  EXPECT_THROW(s.channel_index("x"), contract_error);
}

TEST(ControlSchedule, Interpolation) {
  ControlSchedule lin({0.0, 1.0, 3.0}, {"a"}, {{0.0, 2.0, 6.0}}, Interpolation::linear);
  EXPECT_DOUBLE_EQ(lin.value(0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(lin.value(0, 2.0), 4.0);
  EXPECT_DOUBLE_EQ(lin.value(0, 5.0), 6.0);
  EXPECT_DOUBLE_EQ(lin.value(0, -1.0), 0.0);
  ControlSchedule pc({0.0, 1.0, 3.0}, {"a"}, {{0.0, 2.0, 6.0}}, Interpolation::constant);
  EXPECT_DOUBLE_EQ(pc.value(0, 0.999), 0.0);
  EXPECT_DOUBLE_EQ(pc.value(0, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(pc.value(0, 2.5), 2.0);
  EXPECT_EQ(pc.breakpoints(), std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(pc.decay_scale(1.0), 1.0);
  pc.set_decay_scale({1.0, 0.5, 0.25});
  EXPECT_DOUBLE_EQ(pc.decay_scale(2.0), 0.5);
}
