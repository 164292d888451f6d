#pragma once
// Three-level Lambda chain: adjoint, critical time, switching time, optimal
// control, efficiency bound, pulses.
//
// Polar dynamics with Omega_s pinned at A and u = cos(theta):
//   r1' = -k u^2 r1 - A u r2,   r2' = A u r1.
// Optimal control: u*(t) = D(t)^(-1/2), D = A^2(tau^2 - t^2) + 2k(tau - t) + 1
// on [0, tau], u* = 1 on [tau, T]. On [0, tau] the trajectory is explicit:
// r1 = u(0)/u(t), r2 = A u(0) t.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "relaxfree/errors.hpp"
#include "relaxfree/expm.hpp"
#include "relaxfree/model.hpp"
#include "relaxfree/propagator.hpp"
#include "relaxfree/roots.hpp"

namespace relaxfree {

enum class AdjointBranch { hyperbolic, degenerate, trigonometric };

inline const char* to_string(AdjointBranch b) {
  switch (b) {
    case AdjointBranch::hyperbolic: return "hyperbolic";
    case AdjointBranch::degenerate: return "degenerate";
    default: return "trigonometric";
  }
}

namespace detail {
inline void check_ka(double k, double a) {
  require(std::isfinite(k) && k >= 0, "decay rate k must be finite and non-negative");
  require(std::isfinite(a) && a > 0, "coupling bound A must be positive and finite");
}
}  // namespace detail

// Adjoint (lambda1, lambda2) integrated backward from lambda(T) = (0, 1) with
// u = 1. Functions of elapsed backward time s = T - t.
class BackwardAdjoint {
 public:
  BackwardAdjoint(double k, double a, double horizon) : k_(k), a_(a), horizon_(horizon) {
    detail::check_ka(k, a);
    detail::require(horizon >= 0, "horizon must be non-negative");
    const double d = k * k - 4 * a * a;
    if (d > 0) {
      branch_ = AdjointBranch::hyperbolic;
      w_ = std::sqrt(d);
    } else if (d < 0) {
      branch_ = AdjointBranch::trigonometric;
      w_ = std::sqrt(-d);
    } else {
      branch_ = AdjointBranch::degenerate;
      w_ = 0.0;
    }
  }

  AdjointBranch branch() const noexcept { return branch_; }
  double horizon() const noexcept { return horizon_; }

  std::array<double, 2> elapsed(double s) const {
    const double damp = std::exp(-0.5 * k_ * s);
    switch (branch_) {
      case AdjointBranch::hyperbolic: {
        const double h = 0.5 * w_ * s;
        if (h < 20) {
          const double sh = std::sinh(h) / w_;
          return {2 * a_ * damp * sh, damp * (std::cosh(h) + k_ * sh)};
        }
        const double ep = std::exp(-0.5 * (k_ - w_) * s), em = std::exp(-0.5 * (k_ + w_) * s);
        return {a_ / w_ * (ep - em), ((k_ + w_) * ep - (k_ - w_) * em) / (2 * w_)};
      }
      case AdjointBranch::trigonometric: {
        const double sn = std::sin(0.5 * w_ * s) / w_;
        return {2 * a_ * damp * sn, damp * (std::cos(0.5 * w_ * s) + k_ * sn)};
      }
      default: {
        const double e = std::exp(-a_ * s);
        return {a_ * s * e, e * (a_ * s + 1)};
      }
    }
  }
  std::array<double, 2> at(double t) const { return elapsed(horizon_ - t); }

  // lambda2 / lambda1 after backward time s > 0.
  double ratio_elapsed(double s) const {
    switch (branch_) {
      case AdjointBranch::hyperbolic: return (k_ + w_) / (2 * a_) + w_ / (a_ * std::expm1(w_ * s));
      case AdjointBranch::trigonometric: {
        const double h = 0.5 * w_ * s;
        return k_ / (2 * a_) + w_ / (2 * a_) * std::cos(h) / std::sin(h);
      }
      default: return 1.0 + 1.0 / (a_ * s);
    }
  }
  double ratio(double t) const { return ratio_elapsed(horizon_ - t); }

 private:
  double k_, a_, horizon_;
  AdjointBranch branch_;
  double w_;
};

inline BackwardAdjoint backward_adjoint(double k, double a, double horizon) { return {k, a, horizon}; }

// Longest horizon for which u* = 1 throughout: the backward time at which
// lambda2/lambda1 reaches 2k/A.
inline double critical_time(double k, double a) {
  detail::check_ka(k, a);
  const double d = k * k - 4 * a * a;
  if (d > 0) {
    const double w = std::sqrt(d);
    return std::log1p(2 * w / (3 * k - w)) / w;
  }
  if (d < 0) {
    const double w = std::sqrt(-d);
    return 2 / w * std::atan2(w, 3 * k);
  }
  return 1 / (3 * a);
}

// Same quantity by bisection on the adjoint ratio; independent of the closed form.
inline double critical_time_by_root(double k, double a) {
  const BackwardAdjoint adj(k, a, 0.0);
  const double target = 2 * k / a;
  auto g = [&](double s) { return adj.ratio_elapsed(s) - target; };
  double hi;
  if (adj.branch() == AdjointBranch::trigonometric) {
    hi = 2 * std::numbers::pi / std::sqrt(4 * a * a - k * k) * (1 - 1e-9);
  } else {
    hi = 1 / a;
    while (g(hi) >= 0) hi *= 2;
  }
  return bisect(g, 0.0, hi, 0.0, +1);
}

// Switching time tau, or nullopt when T <= T_M (no switch, u* = 1).
inline std::optional<double> switching_time(double k, double a, double T) {
  detail::check_ka(k, a);
  detail::require(T > 0 && std::isfinite(T), "horizon T must be positive");
  const double tm = critical_time(k, a);
  if (T <= tm) return std::nullopt;
  const BackwardAdjoint adj(k, a, T);
  const double c = 2 * k / a;
  // h(s) with s = T - tau; h(0+) = +inf, h(T_M) = -A (T - T_M) < 0.
  auto h = [&](double s) { return adj.ratio_elapsed(s) - a * (T - s) - c; };
  // First sign change nearest s = 0: the u = 1 arc ends at the first crossing.
  constexpr int scan = 64;
  double lo = 0.0, hi = tm;
  for (int i = 1; i <= scan; ++i) {
    const double s = tm * i / scan;
    if (h(s) < 0) {
      hi = s;
      break;
    }
    lo = s;
  }
  const double s = bisect(h, lo, hi, 0.0, +1);
  return T - s;
}

enum class ThreeLevelCase { short_time, switched };

inline const char* to_string(ThreeLevelCase c) { return c == ThreeLevelCase::short_time ? "short-time" : "switched"; }

class ThreeLevelSolution {
 public:
  ThreeLevelSolution(double k, double a, double T) : k_(k), a_(a), T_(T) {
    detail::check_ka(k, a);
    detail::require(T > 0 && std::isfinite(T), "horizon T must be positive");
    tm_ = relaxfree::critical_time(k, a);
    if (auto tau = switching_time(k, a, T)) {
      case_ = ThreeLevelCase::switched;
      tau_ = *tau;
      ramp_ = *tau;
      u0_ = 1 / std::sqrt(d(0.0));
    } else {
      case_ = ThreeLevelCase::short_time;
      tau_ = T;
      ramp_ = 0.0;
      u0_ = 1.0;
    }
    const auto rt = r(T);
    eff_ = rt[1];
  }

  double k() const noexcept { return k_; }
  double bound() const noexcept { return a_; }
  double horizon() const noexcept { return T_; }
  ThreeLevelCase case_label() const noexcept { return case_; }
  double critical_time() const noexcept { return tm_; }
  // Switching time; equals T in the short-time case.
  double tau() const noexcept { return tau_; }
  // End of the u < 1 phase: tau when switched, 0 otherwise.
  double ramp_end() const noexcept { return ramp_; }
  double efficiency() const noexcept { return eff_; }
  double u0() const noexcept { return u0_; }

  double u(double t) const { return t < ramp_ ? 1 / std::sqrt(d(t)) : 1.0; }
  double du(double t) const {
    if (t >= ramp_) return 0.0;
    const double w = u(t);
    return (a_ * a_ * t + k_) * w * w * w;
  }

  // (r1, r2) along the optimal trajectory (after the initial pump kick).
  std::array<double, 2> r(double t) const {
    if (t < ramp_) return {u0_ / u(t), a_ * u0_ * t};
    Eigen::Matrix2d m;
    m << -k_, -a_, a_, 0.0;
    const Eigen::Vector2d r0(u0_, a_ * ramp_ * u0_);
    const Eigen::Vector2d rt = expm2(m, t - ramp_) * r0;
    return {rt(0), rt(1)};
  }
  double b(double t) const {
    const auto v = r(t);
    return v[1] / v[0];
  }
  // lambda2 / lambda1.
  double a(double t) const {
    if (t < ramp_) return a_ * t * u(t) + 2 * k_ / a_ * u(t);
    return BackwardAdjoint(k_, a_, T_).ratio(t);
  }

  // Pump amplitude on [0, ramp_end); infinite (not representable) after.
  double pump(double t) const {
    detail::require(t < ramp_, "pump is unbounded once u* = 1");
    return (a_ * a_ * t + k_) / std::sqrt((ramp_ - t) * (a_ * a_ * (ramp_ + t) + 2 * k_));
  }
  // Time at which the pump reaches `cap`; the pump is flagged from there on.
  double cutoff_time(double cap) const {
    detail::require(cap > 0, "pump cap must be positive");
    if (ramp_ <= 0 || pump(0.0) >= cap) return 0.0;
    return bisect([&](double t) { return pump(t) - cap; }, 0.0, ramp_, 0.0, -1);
  }

 private:
  double d(double t) const { return a_ * a_ * (tau_ * tau_ - t * t) + 2 * k_ * (tau_ - t) + 1; }

  double k_, a_, T_;
  ThreeLevelCase case_ = ThreeLevelCase::short_time;
  double tm_ = 0, tau_ = 0, ramp_ = 0, u0_ = 1, eff_ = 0;
};

inline ThreeLevelSolution optimal_u(double k, double a, double T) { return {k, a, T}; }

inline double efficiency_bound(double k, double a, double T) { return optimal_u(k, a, T).efficiency(); }

// u* as a one-channel control source.
struct OptimalU {
  ThreeLevelSolution sol;
  std::size_t channels() const { return 1; }
  void evaluate(double t, std::span<double> out) const { out[0] = sol.u(t); }
  std::vector<double> breakpoints() const {
    if (sol.ramp_end() > 0) return {sol.ramp_end()};
    return {};
  }
};

// Optimal (Omega_p, Omega_s) in closed form. Omega_s = A. An initial kick
// of angle asin(u(0)) puts x2 = u(0); the pump is flagged once it exceeds
// `cap`, where a complete kick empties |1>.
class OptimalPulses {
 public:
  explicit OptimalPulses(ThreeLevelSolution sol, double cap = 0.0) : sol_(std::move(sol)) {
    cap_ = cap > 0 ? cap : 1e4 * sol_.bound();
    t_cut_ = sol_.cutoff_time(cap_);
    pulses_.push_back({0.0, 0, std::asin(std::min(sol_.u0(), 1.0))});
    pulses_.push_back({t_cut_, 0, std::nullopt});
  }
  const ThreeLevelSolution& solution() const noexcept { return sol_; }
  double cutoff_time() const noexcept { return t_cut_; }
  double cap() const noexcept { return cap_; }
  std::size_t channels() const { return 2; }
  double duration() const { return sol_.horizon(); }
  void evaluate(double t, std::span<double> out) const {
    out[0] = flagged_at(0, t) ? 0.0 : sol_.pump(t);
    out[1] = sol_.bound();
  }
  bool flagged_at(std::size_t c, double t) const { return c == 0 && t >= t_cut_; }
  std::vector<double> breakpoints() const { return {t_cut_}; }
  const std::vector<HardPulse>& hard_pulses() const { return pulses_; }

 private:
  ThreeLevelSolution sol_;
  double cap_ = 0, t_cut_ = 0;
  std::vector<HardPulse> pulses_;
};

// Uniform grid with the cutoff time inserted.
inline std::vector<double> pulse_grid(double T, std::size_t samples, std::initializer_list<double> extra = {}) {
  detail::require(samples >= 2, "need at least 2 samples");
  std::vector<double> g(samples);
  for (std::size_t i = 0; i < samples; ++i) g[i] = T * static_cast<double>(i) / static_cast<double>(samples - 1);
  g.back() = T;
  for (double e : extra)
    if (e > 0 && e < T) g.push_back(e);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end(), [&](double x, double y) { return y - x <= 1e-12 * T; }), g.end());
  g.back() = T;
  return g;
}

inline ControlSchedule optimal_pulse_schedule(const OptimalPulses& p, std::size_t samples) {
  auto s = sample_schedule(p, pulse_grid(p.solution().horizon(), samples, {p.cutoff_time()}),
                           {"omega_p", "omega_s"});
  s.set_bound(1, p.solution().bound());
  return s;
}

struct StirapOptions {
  std::size_t samples = 4001;
  double edge_width = 0.0;  // half-cosine Stokes rise / pump fall, 0 = off
};

struct StirapPulses {
  ControlSchedule schedule;
  double beta = 0.0;
  double phi = 0.0;
  double protocol_start = 0.0;  // start of the Omega_s = A plateau
  double protocol_end = 0.0;
};

// Adiabatic dark-state pulses: Omega_s = A, Omega_p = A tan(theta(t)) where
// theta follows the optimal dark ratio A t u*(t) up to the switch and is then
// held; for beta below the final mixing angle the profile is scaled to end
// at beta. phi is carried as metadata only.
inline StirapPulses stirap_limit_pulses(double k, double a, double T, double beta, double phi,
                                        const StirapOptions& opt = {}) {
  detail::check_ka(k, a);
  detail::require(beta >= 0 && beta <= std::numbers::pi / 2, "beta must lie in [0, pi/2]");
  detail::require(phi >= -std::numbers::pi && phi <= std::numbers::pi, "phi must lie in [-pi, pi]");
  detail::require(opt.edge_width >= 0 && std::isfinite(opt.edge_width), "edge width must be non-negative");
  detail::require(opt.samples >= 3, "need at least 3 samples");
  const ThreeLevelSolution sol(k, a, T);
  detail::require(sol.case_label() == ThreeLevelCase::switched, "T must exceed the critical time");
  const double tau = sol.tau();
  auto ratio = [&](double t) { return a * std::min(t, tau) * sol.u(std::min(t, tau)); };
  const double end_angle = std::atan(ratio(T));
  const double scale = beta < end_angle ? beta / end_angle : 1.0;
  auto pump = [&](double t) { return beta == 0 ? 0.0 : a * std::tan(scale * std::atan(ratio(t))); };

  const double w = opt.edge_width;
  const std::size_t ne = w > 0 ? std::max<std::size_t>(opt.samples / 20, 8) : 0;
  std::vector<double> grid, wp, ws;
  auto push = [&](double t, double p, double s) {
    grid.push_back(t);
    wp.push_back(p);
    ws.push_back(s);
  };
  for (std::size_t i = 0; i < ne; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(ne);
    push(w * f, 0.0, a * 0.5 * (1 - std::cos(std::numbers::pi * f)));
  }
  for (std::size_t i = 0; i < opt.samples; ++i) {
    const double t = T * static_cast<double>(i) / static_cast<double>(opt.samples - 1);
    push(w + t, pump(t), a);
  }
  const double pend = pump(T);
  for (std::size_t i = 1; i <= ne; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(ne);
    push(w + T + w * f, pend * 0.5 * (1 + std::cos(std::numbers::pi * f)), 0.0);
  }
  ControlSchedule s(std::move(grid), {"omega_p", "omega_s"}, {std::move(wp), std::move(ws)}, Interpolation::linear);
  s.set_bound(1, a);
  return {std::move(s), beta, phi, w, w + T};
}

}  // namespace relaxfree
