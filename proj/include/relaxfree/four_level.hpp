#pragma once
// Four-level chain |1> - |2>(k) - |3>(k) - |4> with Omega_I bounded by A.
//
// Polar dynamics (u1 = cos(theta1), u2 = cos(theta2)):
//   r1' = -k u1^2 r1 - A u1 u2 r2,   r2' = A u1 u2 r1 - k u2^2 r2.
// Case I  (T <= acot(2 xi)/A): u1 = u2 = 1, efficiency e^{-kT} sin(AT).
// Case II: three phases. [0, tau]: u2 = 1, u1 rises to 1. [tau, T - tau]:
// u1 = u2 = 1. [T - tau, T]: u1 = 1, u2(t) = u1(T - t).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "relaxfree/errors.hpp"
#include "relaxfree/model.hpp"
#include "relaxfree/propagator.hpp"
#include "relaxfree/roots.hpp"

namespace relaxfree {

enum class FourLevelCase { I, II };

inline const char* to_string(FourLevelCase c) { return c == FourLevelCase::I ? "I" : "II"; }

namespace detail {
inline void check_four(double k, double a, double T) {
  require(std::isfinite(k) && k >= 0, "decay rate k must be finite and non-negative");
  require(std::isfinite(a) && a > 0, "coupling bound A must be positive and finite");
  require(std::isfinite(T) && T > 0, "horizon T must be positive");
}

// Boundary data at the end of phase 1 as functions of tau.
struct CaseIIAngles {
  double q = 0, kappa = 0, gamma1 = 0, gamma2 = 0;
};

inline CaseIIAngles case2_angles(double xi, double a, double tau) {
  const double s = std::sqrt(1 + xi * xi);
  const double x = a * s * tau + 2 * std::asinh(xi);
  // q = (1 - kappa) / (2 xi) = s coth(x) - xi, written without cancellation.
  const double e = std::expm1(2 * x);
  const double q = 1 / (s + xi) + 2 * s / e;
  CaseIIAngles r;
  r.q = q;
  r.kappa = 1 - 2 * xi * q;
  r.gamma2 = std::atan(q);
  r.gamma1 = std::atan2(r.kappa, q);
  return r;
}
}  // namespace detail

inline double asymptotic_efficiency(double xi) {
  detail::require(std::isfinite(xi) && xi >= 0, "xi must be finite and non-negative");
  return 1 / (std::sqrt(1 + xi * xi) + xi);
}

inline double case_threshold(double k, double a) { return std::atan2(1.0, 2 * k / a) / a; }

inline FourLevelCase classify_case(double k, double a, double T) {
  detail::check_four(k, a, T);
  return T <= case_threshold(k, a) ? FourLevelCase::I : FourLevelCase::II;
}

inline double case1_efficiency(double k, double a, double T) {
  detail::require(classify_case(k, a, T) == FourLevelCase::I, "T lies outside the Case I region");
  return std::exp(-k * T) * std::sin(a * T);
}

class FourLevelSolution {
 public:
  FourLevelSolution(double k, double a, double T) : k_(k), a_(a), T_(T) {
    detail::check_four(k, a, T);
    xi_ = k / a;
    eta_inf_ = asymptotic_efficiency(xi_);
    case_ = classify_case(k, a, T);
    if (case_ == FourLevelCase::I) {
      tau_ = 0;
      eff_ = std::exp(-k * T) * std::sin(a * T);
      return;
    }
    solve_tau();
    const auto g = detail::case2_angles(xi_, a_, tau_);
    q_ = g.q;
    kappa_ = g.kappa;
    gamma1_ = g.gamma1;
    gamma2_ = g.gamma2;
    eff_ = std::exp(xi_ * (gamma1_ - gamma2_)) * (1 - xi_ * std::sin(2 * gamma2_)) / std::sin(gamma1_ + gamma2_);
    xtau_ = a_ * std::sqrt(1 + xi_ * xi_) * tau_ + std::asinh(xi_);
    u0_ = u1(0.0);
  }

  double k() const noexcept { return k_; }
  double bound() const noexcept { return a_; }
  double horizon() const noexcept { return T_; }
  double xi() const noexcept { return xi_; }
  FourLevelCase case_label() const noexcept { return case_; }
  double tau() const noexcept { return tau_; }
  double gamma1() const noexcept { return gamma1_; }
  double gamma2() const noexcept { return gamma2_; }
  double kappa() const noexcept { return kappa_; }
  // Terminal polar angle entering the finite-time efficiency; equals gamma2.
  double theta2() const noexcept { return gamma2_; }
  double u0() const noexcept { return u0_; }
  double efficiency() const noexcept { return eff_; }
  double efficiency_infinite() const noexcept { return eta_inf_; }
  double hold_length() const noexcept { return case_ == FourLevelCase::I ? T_ : T_ - 2 * tau_; }
  double residual() const {
    return case_ == FourLevelCase::I ? 0.0 : T_ - 2 * tau_ - (gamma2_ - gamma1_) / a_;
  }
  bool residual_monotone() const noexcept { return monotone_; }

  // Phase-1 control: u1 = rho / sqrt(2 - rho^2), rho = cosh(X(t)) / cosh(X(tau)),
  // X(t) = A sqrt(1 + xi^2) t + asinh(xi).
  double u1(double t) const {
    if (case_ == FourLevelCase::I || t >= tau_) return 1.0;
    const double rho = ratio(t);
    return rho / std::sqrt(2 - rho * rho);
  }
  double du1(double t) const {
    if (case_ == FourLevelCase::I || t >= tau_) return 0.0;
    const double rho = ratio(t);
    const double s = std::sqrt(1 + xi_ * xi_);
    const double x = a_ * s * t + std::asinh(xi_);
    return 2 * rho * std::tanh(x) * a_ * s / std::pow(2 - rho * rho, 1.5);
  }
  double u2(double t) const { return u1(T_ - t); }
  double du2(double t) const { return -du1(T_ - t); }

  // b = r2/r1 during phase 1.
  double b(double t) const {
    const double w = u1(t);
    const double u02 = u0_ * u0_;
    return -xi_ * w + std::sqrt(std::max(0.0, xi_ * xi_ * w * w + (w * w - u02) / (1 + u02)));
  }

  // Phase-1 pump (t < tau); the phase-3 Stokes is its mirror image.
  double pump(double t) const {
    detail::require(case_ == FourLevelCase::II && t < tau_, "pump is finite only inside phase 1");
    const double w = u1(t);
    const double rho = ratio(t);
    const double c = std::sqrt(2 * (1 - rho * rho) / (2 - rho * rho));  // sqrt(1 - u1^2)
    return c * (k_ * w + a_ * b(t)) + du1(t) / c;
  }

  // Time in phase 1 at which the pump reaches `cap`.
  double cutoff_time(double cap) const {
    detail::require(cap > 0, "pump cap must be positive");
    if (case_ == FourLevelCase::I || pump(0.0) >= cap) return 0.0;
    return bisect([&](double t) { return pump(t) - cap; }, 0.0, tau_, 0.0, -1);
  }

 private:
  double ratio(double t) const {
    const double s = std::sqrt(1 + xi_ * xi_);
    const double xt = a_ * s * t + std::asinh(xi_);
    return std::exp(xt - xtau_) * (1 + std::exp(-2 * xt)) / (1 + std::exp(-2 * xtau_));
  }

  void solve_tau() {
    auto res = [&](double tau) {
      const auto g = detail::case2_angles(xi_, a_, tau);
      return T_ - 2 * tau - (g.gamma2 - g.gamma1) / a_;
    };
    const double hi = 0.5 * T_;
    // Sample the residual; it should decrease monotonically from > 0 to < 0.
    constexpr int n = 32;
    std::array<double, n + 1> v{};
    for (int i = 1; i <= n; ++i) v[i] = res(hi * i / n);
    v[0] = std::numeric_limits<double>::infinity();
    monotone_ = std::is_sorted(v.rbegin(), v.rend());
    double lo_t = 0.0, hi_t = hi;
    if (!monotone_) {
      int i = 1;
      while (i <= n && v[i] > 0) ++i;
      if (i > n) throw numerical_error("tau residual not bracketed on [0, T/2] for T=" + std::to_string(T_));
      lo_t = hi * (i - 1) / n;
      hi_t = hi * i / n;
    } else if (v[n] >= 0) {
      // At tau = T/2 the residual is -(gamma2 - gamma1)/A, negative but
      // exponentially small in T; once it rounds away the hold phase is empty.
      if (v[n] > 1e-9 * std::max(1.0, T_))
        throw numerical_error("tau residual not bracketed on [0, T/2] for T=" + std::to_string(T_));
      tau_ = hi;
      return;
    }
    tau_ = bisect(res, lo_t, hi_t, 0.0, +1);
  }

  double k_, a_, T_;
  double xi_ = 0, eta_inf_ = 1;
  FourLevelCase case_ = FourLevelCase::I;
  double tau_ = 0, q_ = 0, kappa_ = 0, gamma1_ = 0, gamma2_ = 0, eff_ = 0, xtau_ = 0, u0_ = 1;
  bool monotone_ = true;
};

inline FourLevelSolution case2_solve(double k, double a, double T) {
  detail::require(classify_case(k, a, T) == FourLevelCase::II, "T lies outside the Case II region");
  return {k, a, T};
}

inline double case2_efficiency(double k, double a, double T) { return case2_solve(k, a, T).efficiency(); }

inline double four_level_efficiency(double k, double a, double T) { return FourLevelSolution(k, a, T).efficiency(); }

// (u1, u2) as a two-channel control source.
struct OptimalU12 {
  FourLevelSolution sol;
  std::size_t channels() const { return 2; }
  void evaluate(double t, std::span<double> out) const {
    out[0] = sol.u1(t);
    out[1] = sol.u2(t);
  }
  std::vector<double> breakpoints() const {
    if (sol.case_label() == FourLevelCase::I) return {};
    return {sol.tau(), sol.horizon() - sol.tau()};
  }
};

// Optimal (Omega_p, Omega_I, Omega_s). Omega_I = A throughout.
// Case I: complete pump kick at 0, complete Stokes kick at T.
// Case II: pump kick asin(u1(0)) at 0, closed-form pump until it reaches
// `cap`, complete pump kick there; Stokes mirrored: a kick at T - tau of the
// angle the flagged stretch would have produced, closed-form Stokes after,
// complete Stokes kick at T.
class FourLevelPulses {
 public:
  explicit FourLevelPulses(FourLevelSolution sol, double cap = 0.0) : sol_(std::move(sol)) {
    cap_ = cap > 0 ? cap : 1e4 * sol_.bound();
    const double T = sol_.horizon();
    if (sol_.case_label() == FourLevelCase::I) {
      pulses_ = {{0.0, 0, std::nullopt}, {T, 2, std::nullopt}};
      return;
    }
    t_cut_ = sol_.cutoff_time(cap_);
    pulses_.push_back({0.0, 0, std::asin(std::min(sol_.u0(), 1.0))});
    pulses_.push_back({t_cut_, 0, std::nullopt});
    pulses_.push_back({T - sol_.tau(), 2, std::acos(std::min(sol_.u1(t_cut_), 1.0))});
    pulses_.push_back({T, 2, std::nullopt});
  }

  const FourLevelSolution& solution() const noexcept { return sol_; }
  double cutoff_time() const noexcept { return t_cut_; }
  std::size_t channels() const { return 3; }
  double duration() const { return sol_.horizon(); }

  bool flagged_at(std::size_t c, double t) const {
    const double T = sol_.horizon();
    if (sol_.case_label() == FourLevelCase::I) return (c == 0 && t <= 0) || (c == 2 && t >= T);
    if (c == 0) return t >= t_cut_ && t <= sol_.tau();
    if (c == 2) return t >= T - sol_.tau() && t <= T - t_cut_;
    return false;
  }
  void evaluate(double t, std::span<double> out) const {
    const double T = sol_.horizon();
    out[1] = sol_.bound();
    out[0] = out[2] = 0.0;
    if (sol_.case_label() == FourLevelCase::I) return;
    if (t < t_cut_) out[0] = sol_.pump(t);
    if (t > T - t_cut_) out[2] = sol_.pump(T - t);
  }
  std::vector<double> breakpoints() const {
    if (sol_.case_label() == FourLevelCase::I) return {};
    const double T = sol_.horizon();
    return {t_cut_, sol_.tau(), T - sol_.tau(), T - t_cut_};
  }
  const std::vector<HardPulse>& hard_pulses() const { return pulses_; }

 private:
  FourLevelSolution sol_;
  double cap_ = 0, t_cut_ = 0;
  std::vector<HardPulse> pulses_;
};

}  // namespace relaxfree
