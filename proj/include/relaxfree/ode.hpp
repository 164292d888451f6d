#pragma once
// Dormand-Prince 5(4) with cubic Hermite dense output and breakpoints.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "relaxfree/errors.hpp"

namespace relaxfree {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 10'000'000;
};

// Piecewise cubic Hermite interpolant through accepted steps. A repeated time
// marks a jump; queries at that time return the post-jump value.
class DenseOutput {
 public:
  void push(double t, const Eigen::VectorXd& y, const Eigen::VectorXd& f) {
    t_.push_back(t);
    y_.push_back(y);
    f_.push_back(f);
  }

  bool empty() const noexcept { return t_.empty(); }
  double t_begin() const { return t_.front(); }
  double t_end() const { return t_.back(); }
  const std::vector<double>& times() const noexcept { return t_; }
  const Eigen::VectorXd& state(std::size_t i) const { return y_.at(i); }
  const Eigen::VectorXd& back() const { return y_.back(); }

  Eigen::VectorXd operator()(double t) const {
    detail::require(!t_.empty(), "dense output is empty");
    if (t <= t_.front()) return y_.front();
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    if (it == t_.end()) return y_.back();
    const auto i = static_cast<std::size_t>(it - t_.begin()) - 1;
    const double h = t_[i + 1] - t_[i];
    const double s = (t - t_[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y_[i] + (s3 - 2 * s2 + s) * h * f_[i] + (-2 * s3 + 3 * s2) * y_[i + 1] +
           (s3 - s2) * h * f_[i + 1];
  }

 private:
  std::vector<double> t_;
  std::vector<Eigen::VectorXd> y_, f_;
};

using OdeRhs = std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)>;
using OdeJump = std::function<void(double, Eigen::VectorXd&)>;

namespace detail {

inline double rms_error(const Eigen::VectorXd& err, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                        const OdeOptions& o) {
  double acc = 0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = o.atol + o.rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    acc += (err(i) / sc) * (err(i) / sc);
  }
  return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(err.size(), 1)));
}

// Integrates one smooth piece [t0, t1], appending accepted steps to `out`.
inline Eigen::VectorXd dopri_piece(const OdeRhs& rhs, double t0, double t1, Eigen::VectorXd y, const OdeOptions& o,
                                   DenseOutput& out, std::size_t& steps) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;

  const Eigen::Index n = y.size();
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), yn(n), tmp(n), err(n);
  // Controls may jump at the piece ends; sample strictly inside the piece.
  double lo = std::nextafter(t0, t1), hi = std::nextafter(t1, t0);
  if (lo > hi) lo = hi = t0;
  auto f = [&](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) { rhs(std::clamp(t, lo, hi), x, dx); };
  f(t0, y, k1);
  out.push(t0, y, k1);

  const double span = t1 - t0;
  if (span <= 0) return y;

  // Starting step (Hairer, Norsett, Wanner).
  double h;
  {
    const double d0 = y.norm(), d1 = k1.norm();
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min({h, span, o.max_step});
    tmp = y + h * k1;
    f(t0 + h, tmp, k2);
    const double d2 = (k2 - k1).norm() / h;
    const double m = std::max(d1, d2);
    const double h1 = m <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / m, 0.2);
    h = std::min({100 * h, h1, span, o.max_step});
  }

  double t = t0;
  while (t < t1) {
    if (++steps > o.max_steps) throw numerical_error("integrator step budget exhausted");
    bool last = false;
    if (t + h >= t1 || t1 - (t + h) < 1e-12 * std::max(1.0, std::abs(t1))) {
      h = t1 - t;
      last = true;
    }
    if (h < 16 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) throw stiff_control_error(t);

    tmp = y + h * a21 * k1;
    f(t + c2 * h, tmp, k2);
    tmp = y + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, tmp, k3);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, tmp, k4);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, tmp, k5);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, tmp, k6);
    yn = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const double tn = last ? t1 : t + h;
    f(tn, yn, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double e = rms_error(err, y, yn, o);
    if (!std::isfinite(e) || !yn.allFinite()) e = std::numeric_limits<double>::infinity();
    if (e <= 1.0) {
      t = tn;
      y = yn;
      k1 = k7;
      out.push(t, y, k1);
      const double fac = e == 0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(e, -0.2)));
      h = std::min(h * fac, o.max_step);
    } else {
      const double fac = std::isfinite(e) ? std::max(0.2, 0.9 * std::pow(e, -0.2)) : 0.2;
      h *= fac;
    }
  }
  return y;
}

}  // namespace detail

// Integrates dy/dt = f(t, y) over [t0, t1]. The integrator restarts at every
// breakpoint inside (t0, t1); `jump`, when given, may modify the state there.
inline DenseOutput integrate(const OdeRhs& f, double t0, double t1, Eigen::VectorXd y0, const OdeOptions& opts,
                             std::span<const double> breakpoints = {}, const OdeJump& jump = {}) {
  detail::require(t1 >= t0, "integration interval reversed");
  detail::require(opts.rtol > 0 && opts.atol > 0, "tolerances must be positive");
  std::vector<double> cuts;
  for (double b : breakpoints)
    if (b > t0 && b < t1) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.push_back(t1);

  DenseOutput out;
  std::size_t steps = 0;
  double a = t0;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    y0 = detail::dopri_piece(f, a, cuts[i], std::move(y0), opts, out, steps);
    if (i + 1 < cuts.size() && jump) jump(cuts[i], y0);
    a = cuts[i];
  }
  return out;
}

}  // namespace relaxfree
