#pragma once
// Chain systems, real/polar state representations, control schedules.
//
// Rotation convention: the complex amplitudes c_j are mapped to real
// amplitudes by x_j = i^{j-1} c_j (x1 = c1, x2 = i c2, x3 = -c3, x4 = -i c4,
// x5 = c5, ...). With zero detunings and real half Rabi frequencies the
// dynamics then read dx/dt = M x with
//   M[j+1][j] = Omega_j,  M[j][j+1] = -Omega_j,  M[j][j] = -k_j.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "relaxfree/errors.hpp"

namespace relaxfree {

using RealState = Eigen::VectorXd;

class ChainSystem {
 public:
  ChainSystem(std::vector<double> decay_rates, double bound, std::vector<std::size_t> bounded_couplings)
      : decay_(std::move(decay_rates)), bound_(bound), bounded_(std::move(bounded_couplings)) {
    detail::require(decay_.size() >= 2, "chain needs at least 2 levels");
    detail::require(std::isfinite(bound_) && bound_ > 0, "coupling bound A must be positive and finite");
    for (double k : decay_)
      detail::require(std::isfinite(k) && k >= 0, "decay rates must be finite and non-negative");
    std::sort(bounded_.begin(), bounded_.end());
    bounded_.erase(std::unique(bounded_.begin(), bounded_.end()), bounded_.end());
    for (std::size_t c : bounded_) detail::require(c < couplings(), "bounded coupling index out of range");
  }

  // |1> -(pump, unbounded)- |2>(k) -(Stokes, bounded by A)- |3>
  static ChainSystem lambda(double k, double a) { return ChainSystem({0.0, k, 0.0}, a, {1}); }

  // |1> -(pump)- |2>(k) -(Omega_I <= A)- |3>(k) -(Stokes)- |4>
  static ChainSystem four_level(double k, double a) { return ChainSystem({0.0, k, k, 0.0}, a, {1}); }

  // n levels, every interior level decays at k, every interior coupling bounded.
  static ChainSystem chain(std::size_t n, double k, double a) {
    detail::require(n >= 3, "chain factory needs at least 3 levels");
    std::vector<double> rates(n, k);
    rates.front() = rates.back() = 0.0;
    std::vector<std::size_t> bounded;
    for (std::size_t c = 1; c + 1 < n - 1; ++c) bounded.push_back(c);
    if (n == 3) bounded.push_back(1);
    return ChainSystem(std::move(rates), a, std::move(bounded));
  }

  std::size_t levels() const noexcept { return decay_.size(); }
  std::size_t couplings() const noexcept { return decay_.size() - 1; }
  double decay(std::size_t level) const { return decay_.at(level); }
  const std::vector<double>& decay_rates() const noexcept { return decay_; }
  double bound() const noexcept { return bound_; }
  const std::vector<std::size_t>& bounded_couplings() const noexcept { return bounded_; }
  bool is_bounded(std::size_t c) const {
    return std::binary_search(bounded_.begin(), bounded_.end(), c);
  }
  bool transfer_problem() const noexcept { return decay_.front() == 0.0 && decay_.back() == 0.0; }
  // k/A using the decay of level 2.
  double xi() const { return decay_.at(1) / bound_; }

  std::vector<std::string> coupling_names() const {
    const std::size_t m = couplings();
    std::vector<std::string> out(m);
    out.front() = "omega_p";
    if (m >= 2) out.back() = "omega_s";
    if (m == 3) out[1] = "omega_i";
    if (m > 3)
      for (std::size_t c = 1; c + 1 < m; ++c) out[c] = "omega_i" + std::to_string(c);
    return out;
  }

  friend bool operator==(const ChainSystem&, const ChainSystem&) = default;

 private:
  std::vector<double> decay_;
  double bound_;
  std::vector<std::size_t> bounded_;
};

inline Eigen::MatrixXd build_real_generator(const ChainSystem& sys, std::span<const double> omega) {
  detail::require(omega.size() == sys.couplings(), "control count does not match coupling count");
  const std::size_t n = sys.levels();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) m(j, j) = -sys.decay(j);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    m(j + 1, j) = omega[j];
    m(j, j + 1) = -omega[j];
  }
  return m;
}

// Polar variables. Three levels: x2 = r1 cos(theta1), x1 = r1 sin(theta1),
// r2 = x3. Four levels: additionally x3 = r2 cos(theta2), x4 = r2 sin(theta2).
// u = cos(theta) is the weight of r1 (resp. r2) on the decaying level.
struct PolarState {
  double r1 = 0.0;
  double r2 = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double u1() const { return std::cos(theta1); }
  double u2() const { return std::cos(theta2); }
};

inline PolarState to_polar(const RealState& x) {
  detail::require(x.size() == 3 || x.size() == 4, "polar form exists for 3 or 4 levels only");
  PolarState p;
  p.r1 = std::hypot(x(0), x(1));
  // theta is undefined at r1 = 0; pick 0.
  p.theta1 = p.r1 > 0 ? std::atan2(std::abs(x(0)), std::abs(x(1))) : 0.0;
  if (x.size() == 3) {
    p.r2 = x(2);
  } else {
    p.r2 = std::hypot(x(2), x(3));
    p.theta2 = p.r2 > 0 ? std::atan2(std::abs(x(3)), std::abs(x(2))) : 0.0;
  }
  return p;
}

inline RealState from_polar(const PolarState& p, std::size_t levels) {
  detail::require(levels == 3 || levels == 4, "polar form exists for 3 or 4 levels only");
  RealState x(static_cast<Eigen::Index>(levels));
  x(0) = p.r1 * std::sin(p.theta1);
  x(1) = p.r1 * std::cos(p.theta1);
  if (levels == 3) {
    x(2) = p.r2;
  } else {
    x(2) = p.r2 * std::cos(p.theta2);
    x(3) = p.r2 * std::sin(p.theta2);
  }
  return x;
}

// Instantaneous rotation that acts on the pair (level c, level c+1), the
// limit of an arbitrarily strong, arbitrarily short pulse on coupling c.
// Without an explicit angle the pulse empties level c into level c+1.
struct HardPulse {
  double time = 0.0;
  std::size_t coupling = 0;
  std::optional<double> angle;

  template <class Vec>
  void apply(Vec& x) const {
    const auto c = static_cast<Eigen::Index>(coupling);
    const double a = angle ? *angle : std::atan2(x(c), x(c + 1));
    const double cs = std::cos(a), sn = std::sin(a);
    const double lo = x(c), hi = x(c + 1);
    x(c) = cs * lo - sn * hi;
    x(c + 1) = sn * lo + cs * hi;
    if (!angle) x(c) = 0.0;
  }
  friend bool operator==(const HardPulse&, const HardPulse&) = default;
};

enum class Interpolation { constant, linear };

inline const char* to_string(Interpolation i) { return i == Interpolation::constant ? "constant" : "linear"; }

// Time-sampled controls. `constant` means piecewise-constant, left-continuous
// on [t_i, t_{i+1}); `linear` interpolates between nodes. Flagged samples
// mark unbounded amplitude: their stored value is 0 and the dynamical effect
// is carried by the hard pulses list.
class ControlSchedule {
 public:
  ControlSchedule() = default;
  ControlSchedule(std::vector<double> grid, std::vector<std::string> names,
                  std::vector<std::vector<double>> values, Interpolation interp)
      : grid_(std::move(grid)), names_(std::move(names)), values_(std::move(values)), interp_(interp) {
    detail::require(grid_.size() >= 2, "schedule grid needs at least 2 points");
    detail::require(grid_.front() == 0.0, "schedule grid must start at 0");
    for (std::size_t i = 1; i < grid_.size(); ++i)
      detail::require(grid_[i] > grid_[i - 1], "schedule grid must be strictly increasing");
    detail::require(!names_.empty() && names_.size() == values_.size(), "channel names and values disagree");
    for (const auto& v : values_) {
      detail::require(v.size() == grid_.size(), "channel length must match grid length");
      for (double x : v) detail::require(std::isfinite(x), "schedule values must be finite");
    }
    bounds_.assign(names_.size(), std::numeric_limits<double>::infinity());
    flags_.assign(names_.size(), std::vector<std::uint8_t>{});
  }

  std::size_t channels() const noexcept { return names_.size(); }
  std::size_t size() const noexcept { return grid_.size(); }
  double duration() const noexcept { return grid_.back(); }
  Interpolation interpolation() const noexcept { return interp_; }
  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<double>& values(std::size_t c) const { return values_.at(c); }
  double bound(std::size_t c) const { return bounds_.at(c); }
  const std::vector<std::uint8_t>& flags(std::size_t c) const { return flags_.at(c); }
  bool flagged(std::size_t c, std::size_t i) const {
    const auto& f = flags_.at(c);
    return !f.empty() && f[i] != 0;
  }
  const std::vector<HardPulse>& hard_pulses() const noexcept { return pulses_; }
  const std::vector<double>& decay_scale_values() const noexcept { return decay_scale_; }

  std::size_t channel_index(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    detail::require(it != names_.end(), "no channel named " + name);
    return static_cast<std::size_t>(it - names_.begin());
  }

  void set_bound(std::size_t c, double b) {
    detail::require(c < channels(), "channel index out of range");
    detail::require(b > 0, "channel bound must be positive");
    for (std::size_t i = 0; i < grid_.size(); ++i)
      detail::require(std::abs(values_[c][i]) <= b * (1 + 1e-12), "channel " + names_[c] + " exceeds its bound");
    bounds_[c] = b;
  }
  void set_flags(std::size_t c, std::vector<std::uint8_t> f) {
    detail::require(c < channels(), "channel index out of range");
    detail::require(f.empty() || f.size() == grid_.size(), "flag length must match grid length");
    for (std::size_t i = 0; i < f.size(); ++i)
      detail::require(!f[i] || values_[c][i] == 0.0, "flagged samples must store 0");
    flags_[c] = std::move(f);
  }
  void add_hard_pulse(const HardPulse& p) {
    detail::require(p.time >= 0 && p.time <= duration(), "hard pulse outside the schedule");
    detail::require(p.coupling < channels(), "hard pulse coupling out of range");
    pulses_.push_back(p);
    std::stable_sort(pulses_.begin(), pulses_.end(),
                     [](const HardPulse& a, const HardPulse& b) { return a.time < b.time; });
  }
  void set_decay_scale(std::vector<double> s) {
    detail::require(s.empty() || s.size() == grid_.size(), "decay scale length must match grid length");
    for (double v : s) detail::require(std::isfinite(v) && v >= 0, "decay scale must be finite and non-negative");
    decay_scale_ = std::move(s);
  }

  void evaluate(double t, std::span<double> out) const {
    detail::require(out.size() == channels(), "output span has wrong channel count");
    const auto [i, w] = locate(t);
    for (std::size_t c = 0; c < channels(); ++c) {
      const auto& v = values_[c];
      out[c] = w == 0.0 ? v[i] : (1 - w) * v[i] + w * v[i + 1];
    }
  }
  double value(std::size_t c, double t) const {
    const auto [i, w] = locate(t);
    const auto& v = values_.at(c);
    return w == 0.0 ? v[i] : (1 - w) * v[i] + w * v[i + 1];
  }
  double decay_scale(double t) const {
    if (decay_scale_.empty()) return 1.0;
    const auto [i, w] = locate(t);
    return w == 0.0 ? decay_scale_[i] : (1 - w) * decay_scale_[i] + w * decay_scale_[i + 1];
  }

  // Interior grid points: kinks (linear) or jumps (constant).
  std::vector<double> breakpoints() const { return {grid_.begin() + 1, grid_.end() - 1}; }

  friend bool operator==(const ControlSchedule&, const ControlSchedule&) = default;

 private:
  // Interval index and linear weight for time t (clamped to the grid).
  std::pair<std::size_t, double> locate(double t) const {
    if (t <= grid_.front()) return {0, 0.0};
    if (t >= grid_.back()) return {grid_.size() - 1, 0.0};
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
    const auto i = static_cast<std::size_t>(it - grid_.begin()) - 1;
    if (interp_ == Interpolation::constant) return {i, 0.0};
    return {i, (t - grid_[i]) / (grid_[i + 1] - grid_[i])};
  }

  std::vector<double> grid_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> values_;
  Interpolation interp_ = Interpolation::linear;
  std::vector<double> bounds_;
  std::vector<std::vector<std::uint8_t>> flags_;
  std::vector<HardPulse> pulses_;
  std::vector<double> decay_scale_;
};

}  // namespace relaxfree
