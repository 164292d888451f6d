#pragma once
// Numerical propagation of the real chain dynamics and of the polar form.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "relaxfree/errors.hpp"
#include "relaxfree/model.hpp"
#include "relaxfree/ode.hpp"
#include "relaxfree/roots.hpp"

namespace relaxfree {

// Anything that yields control values at an instant. Optional members:
// breakpoints(), hard_pulses(), decay_scale(t), duration(), flagged(c, t).
template <class C>
concept ControlSource = requires(const C& c, double t, std::span<double> out) {
  { c.channels() } -> std::convertible_to<std::size_t>;
  c.evaluate(t, out);
};

namespace detail {
template <class C>
std::vector<double> breakpoints_of(const C& c) {
  if constexpr (requires { c.breakpoints(); }) {
    auto b = c.breakpoints();
    return {b.begin(), b.end()};
  } else {
    return {};
  }
}
template <class C>
std::vector<HardPulse> hard_pulses_of(const C& c) {
  if constexpr (requires { c.hard_pulses(); }) {
    auto p = c.hard_pulses();
    return {p.begin(), p.end()};
  } else {
    return {};
  }
}
template <class C>
double decay_scale_of(const C& c, double t) {
  if constexpr (requires { c.decay_scale(t); }) return c.decay_scale(t);
  else return 1.0;
}
template <class C>
bool flagged_of(const C& c, std::size_t ch, double t) {
  if constexpr (requires { c.flagged_at(ch, t); }) return c.flagged_at(ch, t);
  else return false;
}
template <class C>
void check_covers(const C& c, double T) {
  if constexpr (requires { c.duration(); })
    require(c.duration() >= T * (1 - 1e-12), "controls do not cover [0, T]");
}
inline OdeOptions tol_options(double tol) {
  require(tol > 0 && tol <= 1e-3, "tolerance must lie in (0, 1e-3]");
  OdeOptions o;
  o.rtol = tol;
  o.atol = tol;
  return o;
}
}  // namespace detail

// Controls given by a callable.
struct FunctionControls {
  std::size_t n = 0;
  std::function<void(double, std::span<double>)> fn;
  std::vector<double> breaks;
  std::vector<HardPulse> pulses;

  std::size_t channels() const { return n; }
  void evaluate(double t, std::span<double> out) const { fn(t, out); }
  const std::vector<double>& breakpoints() const { return breaks; }
  const std::vector<HardPulse>& hard_pulses() const { return pulses; }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<RealState> states;
  std::vector<std::vector<double>> populations;
  std::vector<double> norm;

  const RealState& final_state() const { return states.back(); }
  std::size_t levels() const { return states.empty() ? 0 : static_cast<std::size_t>(states.front().size()); }
};

namespace detail {
inline void push_sample(Trajectory& tr, double t, const RealState& x) {
  tr.times.push_back(t);
  tr.states.push_back(x);
  std::vector<double> p(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) p[static_cast<std::size_t>(i)] = x(i) * x(i);
  tr.populations.push_back(std::move(p));
  tr.norm.push_back(x.norm());
}
}  // namespace detail

// Integrates dx/dt = M(t) x on [0, T]. Without explicit sample times every
// accepted step is recorded. The last sample is always the state at t = T,
// after any hard pulse scheduled at T.
template <ControlSource C>
Trajectory propagate(const ChainSystem& sys, const C& ctrl, const RealState& x0, double T, double tol,
                     std::span<const double> samples = {}) {
  detail::require(T > 0 && std::isfinite(T), "horizon T must be positive");
  detail::require(ctrl.channels() == sys.couplings(), "control channel count does not match the chain");
  detail::require(static_cast<std::size_t>(x0.size()) == sys.levels(), "initial state has wrong dimension");
  detail::check_covers(ctrl, T);
  const OdeOptions opts = detail::tol_options(tol);

  const std::size_t n = sys.levels();
  const std::vector<double> k = sys.decay_rates();
  auto pulses = detail::hard_pulses_of(ctrl);
  for (const auto& p : pulses) detail::require(p.coupling < sys.couplings(), "hard pulse on unknown coupling");

  std::vector<double> omega(n - 1);
  OdeRhs rhs = [&](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
    ctrl.evaluate(t, omega);
    const double s = detail::decay_scale_of(ctrl, t);
    for (std::size_t j = 0; j < n; ++j) {
      double v = -s * k[j] * x(j);
      if (j > 0) v += omega[j - 1] * x(j - 1);
      if (j + 1 < n) v -= omega[j] * x(j + 1);
      dx(j) = v;
    }
  };

  RealState x = x0;
  std::vector<double> breaks;
  for (double b : detail::breakpoints_of(ctrl))
    if (b > 0 && b < T) breaks.push_back(b);
  // Sample times are integration stops, so samples are accepted steps rather
  // than interpolated values.
  for (double t : samples)
    if (t > 0 && t < T) breaks.push_back(t);
  for (const auto& p : pulses) {
    if (p.time <= 0) p.apply(x);
    else if (p.time < T) breaks.push_back(p.time);
  }
  OdeJump jump = [&](double t, Eigen::VectorXd& y) {
    for (const auto& p : pulses)
      if (p.time == t) p.apply(y);
  };

  DenseOutput dense = integrate(rhs, 0.0, T, x, opts, breaks, jump);
  RealState xf = dense.back();
  for (const auto& p : pulses)
    if (p.time >= T) p.apply(xf);

  Trajectory tr;
  if (samples.empty()) {
    const auto& ts = dense.times();
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) detail::push_sample(tr, ts[i], dense.state(i));
  } else {
    for (double t : samples) {
      detail::require(t >= 0 && t <= T, "sample time outside [0, T]");
      if (t < T) detail::push_sample(tr, t, dense(t));
    }
  }
  detail::push_sample(tr, T, xf);
  return tr;
}

inline RealState ground_state(std::size_t levels) {
  RealState x = RealState::Zero(static_cast<Eigen::Index>(levels));
  x(0) = 1.0;
  return x;
}

// (r1, r2) samples with a dense interpolant.
struct PolarTrajectory {
  std::vector<double> times;
  std::vector<double> r1, r2;
  DenseOutput dense;

  std::array<double, 2> at(double t) const {
    const Eigen::VectorXd v = dense(t);
    return {v(0), v(1)};
  }
  double efficiency() const { return r2.back(); }
};

// Polar dynamics. Three levels (one channel u):
//   r1' = -k u^2 r1 - A u r2,  r2' = A u r1.
// Four levels (channels u1, u2):
//   r1' = -k2 u1^2 r1 - A u1 u2 r2,  r2' = A u1 u2 r1 - k3 u2^2 r2.
template <ControlSource C>
PolarTrajectory propagate_polar(const ChainSystem& sys, const C& u, double T, double tol,
                                std::span<const double> samples = {}, std::array<double, 2> r0 = {1.0, 0.0}) {
  detail::require(T > 0 && std::isfinite(T), "horizon T must be positive");
  const std::size_t n = sys.levels();
  detail::require(n == 3 || n == 4, "polar propagation exists for 3 or 4 levels only");
  detail::require(u.channels() == n - 2, "polar controls need 1 (3-level) or 2 (4-level) channels");
  detail::check_covers(u, T);
  const OdeOptions opts = detail::tol_options(tol);
  const double a = sys.bound();
  const double k1 = sys.decay(1), k2 = sys.decay(n - 2);

  std::array<double, 2> buf{};
  std::span<double> v(buf.data(), n - 2);
  auto load = [&](double t) {
    u.evaluate(t, v);
    for (double x : v)
      if (!(x >= -1e-12 && x <= 1 + 1e-12))
        throw contract_error("u = " + std::to_string(x) + " outside [0,1] at t=" + std::to_string(t));
  };
  OdeRhs rhs = [&](double t, const Eigen::VectorXd& r, Eigen::VectorXd& dr) {
    load(t);
    const double s = detail::decay_scale_of(u, t);
    if (n == 3) {
      const double w = buf[0];
      dr(0) = -s * k1 * w * w * r(0) - a * w * r(1);
      dr(1) = a * w * r(0);
    } else {
      const double w1 = buf[0], w2 = buf[1];
      dr(0) = -s * k1 * w1 * w1 * r(0) - a * w1 * w2 * r(1);
      dr(1) = a * w1 * w2 * r(0) - s * k2 * w2 * w2 * r(1);
    }
  };
  Eigen::VectorXd y(2);
  y << r0[0], r0[1];
  std::vector<double> breaks;
  for (double b : detail::breakpoints_of(u))
    if (b > 0 && b < T) breaks.push_back(b);
  for (double t : samples)
    if (t > 0 && t < T) breaks.push_back(t);

  PolarTrajectory out;
  out.dense = integrate(rhs, 0.0, T, y, opts, breaks);
  auto push = [&](double t, const Eigen::VectorXd& r) {
    out.times.push_back(t);
    out.r1.push_back(r(0));
    out.r2.push_back(r(1));
  };
  if (samples.empty()) {
    for (std::size_t i = 0; i + 1 < out.dense.times().size(); ++i) push(out.dense.times()[i], out.dense.state(i));
  } else {
    for (double t : samples) {
      detail::require(t >= 0 && t <= T, "sample time outside [0, T]");
      if (t < T) push(t, out.dense(t));
    }
  }
  push(T, out.dense.back());
  return out;
}

// Full three-level controls recovered from a polar trajectory and u(t):
//   Omega_p = (-k u^3 r1 - A u^2 r2 + r1 u' + k r1 u + A r2) / (r1 sqrt(1 - u^2)),
//   Omega_s = A,
// with an initial pump kick of angle asin(u(0)) placing x2 = r1 u(0). If u
// reaches 1 at `switch_time`, Omega_p diverges there; above `cutoff` the pump
// is flagged, the remaining rotation is applied as one complete kick and the
// stored pump value is 0.
class ReconstructedControls {
 public:
  using Fn = std::function<double(double)>;

  ReconstructedControls(const ChainSystem& sys, PolarTrajectory traj, Fn u, Fn du,
                        std::optional<double> switch_time = std::nullopt, double cutoff = 0.0)
      : k_(sys.decay(1)), a_(sys.bound()), traj_(std::move(traj)), u_(std::move(u)), du_(std::move(du)) {
    detail::require(sys.levels() == 3, "control reconstruction is defined for the three-level chain");
    const double u0 = u_(0.0);
    detail::require(u0 >= 0 && u0 <= 1, "u(0) outside [0,1]");
    pulses_.push_back({0.0, 0, std::asin(std::min(u0, 1.0))});
    if (switch_time) {
      const double ts = *switch_time;
      const double cap = cutoff > 0 ? cutoff : 1e4 * a_;
      t_cut_ = ts;
      if (ts > 0 && pump(0.0) < cap) {
        // Omega_p grows like (ts - t)^(-1/2); walk towards ts until it exceeds cap.
        double lo = 0.0, hi = ts;
        for (int j = 1; j < 200; ++j) {
          const double t = ts - ts * std::ldexp(1.0, -j);
          if (t >= ts) break;
          if (pump(t) >= cap) {
            hi = t;
            break;
          }
          lo = t;
        }
        t_cut_ = hi >= ts ? lo : bisect([&](double t) { return pump(t) - cap; }, lo, hi, 1e-15 * std::max(1.0, ts));
      } else if (ts > 0) {
        t_cut_ = 0.0;
      }
      pulses_.push_back(HardPulse{*t_cut_, 0, std::nullopt});
    }
  }

  std::size_t channels() const { return 2; }
  void evaluate(double t, std::span<double> out) const {
    out[0] = flagged_at(0, t) ? 0.0 : pump(t);
    out[1] = a_;
  }
  bool flagged_at(std::size_t c, double t) const { return c == 0 && t_cut_ && t >= *t_cut_; }
  // The pump reads (r1, r2) from a piecewise cubic; its knots are kinks.
  std::vector<double> breakpoints() const {
    std::vector<double> b(traj_.dense.times());
    if (t_cut_) {
      std::erase_if(b, [&](double t) { return t >= *t_cut_; });
      b.push_back(*t_cut_);
    }
    return b;
  }
  const std::vector<HardPulse>& hard_pulses() const { return pulses_; }
  std::optional<double> cutoff_time() const { return t_cut_; }

  double pump(double t) const {
    const double w = u_(t);
    const auto [r1, r2] = traj_.at(t);
    if (!(r1 >= 1e-12)) throw numerical_error("bright state depleted (r1 < 1e-12) at t=" + std::to_string(t));
    const double num = -k_ * w * w * w * r1 - a_ * w * w * r2 + r1 * du_(t) + k_ * r1 * w + a_ * r2;
    return num / (r1 * std::sqrt(std::max(0.0, 1 - w * w)));
  }

 private:
  double k_, a_;
  PolarTrajectory traj_;
  Fn u_, du_;
  std::optional<double> t_cut_;
  std::vector<HardPulse> pulses_;
};

inline ReconstructedControls reconstruct_full_controls(const ChainSystem& sys, PolarTrajectory traj,
                                                       ReconstructedControls::Fn u, ReconstructedControls::Fn du,
                                                       std::optional<double> switch_time = std::nullopt,
                                                       double cutoff = 0.0) {
  return {sys, std::move(traj), std::move(u), std::move(du), switch_time, cutoff};
}

// Samples a control source on a grid. Flagged samples store 0.
template <ControlSource C>
ControlSchedule sample_schedule(const C& src, std::vector<double> grid, std::vector<std::string> names,
                                Interpolation interp = Interpolation::linear) {
  detail::require(names.size() == src.channels(), "channel names do not match the source");
  std::vector<std::vector<double>> vals(names.size(), std::vector<double>(grid.size()));
  std::vector<std::vector<std::uint8_t>> flags(names.size(), std::vector<std::uint8_t>(grid.size(), 0));
  bool any_flag = false;
  std::vector<double> buf(names.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    src.evaluate(grid[i], buf);
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (detail::flagged_of(src, c, grid[i])) {
        flags[c][i] = 1;
        any_flag = true;
        vals[c][i] = 0.0;
      } else {
        vals[c][i] = buf[c];
      }
    }
  }
  ControlSchedule s(std::move(grid), std::move(names), std::move(vals), interp);
  if (any_flag)
    for (std::size_t c = 0; c < s.channels(); ++c) s.set_flags(c, std::move(flags[c]));
  for (const auto& p : detail::hard_pulses_of(src))
    if (p.time <= s.duration()) s.add_hard_pulse(p);
  return s;
}

struct RescaleResult {
  ControlSchedule schedule;
  double duration = 0.0;
  bool truncated = false;
};

// Reparametrizes time by ds = max(1, Omega_p/A) dt wherever the pump exceeds
// A: all channels are divided by the local stretch (preserving their ratios)
// and the decay terms pick up the factor 1/stretch through the decay-scale
// channel. Stretch is capped at `max_stretch`; hitting the cap sets
// `truncated`. Flagged samples pass through unchanged.
inline RescaleResult rescale_time(const ControlSchedule& in, double a, std::size_t pump = 0,
                                  double max_stretch = 1e6) {
  detail::require(a > 0, "bound A must be positive");
  detail::require(pump < in.channels(), "pump channel out of range");
  detail::require(max_stretch >= 1, "max_stretch must be at least 1");
  const auto& g = in.grid();
  const std::size_t m = g.size();
  bool truncated = false;
  auto stretch_at = [&](std::size_t i) {
    if (in.flagged(pump, i)) return 1.0;
    const double s = in.values(pump)[i] / a;
    if (s > max_stretch) truncated = true;
    return std::clamp(s, 1.0, max_stretch);
  };
  std::vector<double> st(m);
  for (std::size_t i = 0; i < m; ++i) st[i] = stretch_at(i);

  // New grid: integral of the stretch factor.
  std::vector<double> ng(m, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double len = g[i + 1] - g[i];
    double seg;
    if (in.interpolation() == Interpolation::constant) {
      seg = len * st[i];
    } else {
      // Pump is linear in between; integrate max(1, p/A) exactly (cap ignored
      // inside the interval, it only enters through the node values).
      const double p0 = in.flagged(pump, i) ? 0.0 : in.values(pump)[i] / a;
      const double p1 = in.flagged(pump, i + 1) ? 0.0 : in.values(pump)[i + 1] / a;
      auto lin = [&](double x0, double x1, double l) { return 0.5 * (std::min(x0, max_stretch) + std::min(x1, max_stretch)) * l; };
      if (p0 <= 1 && p1 <= 1) {
        seg = len;
      } else if (p0 >= 1 && p1 >= 1) {
        seg = lin(p0, p1, len);
      } else {
        const double f = (1 - p0) / (p1 - p0);
        seg = p0 < 1 ? f * len + lin(1, p1, (1 - f) * len) : lin(p0, 1, f * len) + (1 - f) * len;
      }
    }
    ng[i + 1] = ng[i] + seg;
  }

  std::vector<std::vector<double>> vals(in.channels(), std::vector<double>(m));
  for (std::size_t c = 0; c < in.channels(); ++c)
    for (std::size_t i = 0; i < m; ++i) vals[c][i] = in.values(c)[i] / st[i];
  std::vector<double> ds(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double base = in.decay_scale_values().empty() ? 1.0 : in.decay_scale_values()[i];
    ds[i] = base / st[i];
  }

  auto map_time = [&](double t) {
    if (t <= 0) return 0.0;
    if (t >= g.back()) return ng.back();
    const auto it = std::upper_bound(g.begin(), g.end(), t);
    const auto i = static_cast<std::size_t>(it - g.begin()) - 1;
    const double w = (t - g[i]) / (g[i + 1] - g[i]);
    return ng[i] + w * (ng[i + 1] - ng[i]);
  };

  ControlSchedule out(ng, in.names(), std::move(vals), in.interpolation());
  for (std::size_t c = 0; c < in.channels(); ++c) {
    out.set_flags(c, in.flags(c));
    if (std::isfinite(in.bound(c))) out.set_bound(c, in.bound(c));
  }
  out.set_decay_scale(std::move(ds));
  for (HardPulse p : in.hard_pulses()) {
    p.time = map_time(p.time);
    out.add_hard_pulse(p);
  }
  return {std::move(out), ng.back(), truncated};
}

}  // namespace relaxfree
