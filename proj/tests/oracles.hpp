#pragma once
// Reference computations that share no code with the library.

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Rhs = std::function<void(double, const Vec&, Vec&)>;

// Classical RK4 with n equal steps.
inline Vec rk4(const Rhs& f, Vec y, double t0, double t1, int n) {
  const double h = (t1 - t0) / n;
  const std::size_t m = y.size();
  Vec k1(m), k2(m), k3(m), k4(m), tmp(m);
  for (int i = 0; i < n; ++i) {
    const double t = t0 + i * h;
    f(t, y, k1);
    for (std::size_t j = 0; j < m; ++j) tmp[j] = y[j] + 0.5 * h * k1[j];
    f(t + 0.5 * h, tmp, k2);
    for (std::size_t j = 0; j < m; ++j) tmp[j] = y[j] + 0.5 * h * k2[j];
    f(t + 0.5 * h, tmp, k3);
    for (std::size_t j = 0; j < m; ++j) tmp[j] = y[j] + h * k3[j];
    f(t + h, tmp, k4);
    for (std::size_t j = 0; j < m; ++j) y[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return y;
}

// Three-level polar dynamics: r1' = -k u^2 r1 - A u r2, r2' = A u r1.
inline std::array<double, 2> polar3(double k, double a, const std::function<double(double)>& u, double t0, double t1,
                                    std::array<double, 2> r0, int n) {
  Rhs f = [&](double t, const Vec& r, Vec& d) {
    const double w = u(t);
    d[0] = -k * w * w * r[0] - a * w * r[1];
    d[1] = a * w * r[0];
  };
  const Vec y = rk4(f, {r0[0], r0[1]}, t0, t1, n);
  return {y[0], y[1]};
}

// Four-level polar dynamics with equal decay on both intermediates.
inline std::array<double, 2> polar4(double k, double a, const std::function<double(double)>& u1,
                                    const std::function<double(double)>& u2, double t0, double t1,
                                    std::array<double, 2> r0, int n) {
  Rhs f = [&](double t, const Vec& r, Vec& d) {
    const double w1 = u1(t), w2 = u2(t);
    d[0] = -k * w1 * w1 * r[0] - a * w1 * w2 * r[1];
    d[1] = a * w1 * w2 * r[0] - k * w2 * w2 * r[1];
  };
  const Vec y = rk4(f, {r0[0], r0[1]}, t0, t1, n);
  return {y[0], y[1]};
}

// Real chain x_j' = Om_{j-1} x_{j-1} - k_j x_j - Om_j x_{j+1}.
inline Vec chain(const Vec& k, const std::function<void(double, Vec&)>& omega, Vec x, double t0, double t1, int n) {
  const std::size_t m = k.size();
  Vec om(m - 1);
  Rhs f = [&](double t, const Vec& y, Vec& d) {
    omega(t, om);
    for (std::size_t j = 0; j < m; ++j) {
      double v = -k[j] * y[j];
      if (j > 0) v += om[j - 1] * y[j - 1];
      if (j + 1 < m) v -= om[j] * y[j + 1];
      d[j] = v;
    }
  };
  return rk4(f, std::move(x), t0, t1, n);
}

// Length (in nodes) of the shortest simple path from s to t with no two
// consecutive decaying nodes, by exhaustive DFS; -1 if none.
inline int shortest_admissible(const std::map<int, std::set<int>>& adj, const std::set<int>& decaying, int s, int t) {
  int best = -1;
  std::set<int> seen{s};
  std::function<void(int, int)> dfs = [&](int v, int len) {
    if (v == t) {
      if (best < 0 || len < best) best = len;
      return;
    }
    for (int w : adj.at(v)) {
      if (seen.contains(w)) continue;
      if (decaying.contains(v) && decaying.contains(w)) continue;
      seen.insert(w);
      dfs(w, len + 1);
      seen.erase(w);
    }
  };
  dfs(s, 1);
  return best;
}

}  // namespace oracle
