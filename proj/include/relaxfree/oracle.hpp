#pragma once
// Adversarial check of the analytic optima: piecewise-constant controls in
// polar variables, exact segment exponentials, random search and projected
// gradient ascent.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "relaxfree/errors.hpp"
#include "relaxfree/expm.hpp"
#include "relaxfree/model.hpp"

namespace relaxfree {

enum class OracleModel {
  three_level,              // u;          Omega_s = A
  three_level_free_stokes,  // u, s;       Omega_s = s A
  four_level,               // u1, u2;     Omega_I = A
  five_chain,               // u1, w1, w2, u3;  inner couplings w A
};

inline const char* to_string(OracleModel m) {
  switch (m) {
    case OracleModel::three_level: return "three_level";
    case OracleModel::three_level_free_stokes: return "three_level_free_stokes";
    case OracleModel::four_level: return "four_level";
    default: return "five_chain";
  }
}

// Five-chain reduced state: (r1, x3, r3) with x2 = r1 u1, x4 = r3 u3:
//   r1' = -k2 u1^2 r1 - w1 A u1 x3
//   x3' =  w1 A u1 r1 - k3 x3 - w2 A u3 r3
//   r3' =  w2 A u3 x3 - k4 u3^2 r3
struct DiscretizedControlProblem {
  ChainSystem sys;
  OracleModel model = OracleModel::three_level;
  double horizon = 1.0;
  std::size_t n_segments = 1;
  std::vector<std::pair<double, double>> bounds;  // per channel
  std::size_t target = 1;                         // index into the reduced state

  static DiscretizedControlProblem three_level(double k, double a, double T, std::size_t n, bool free_stokes = false) {
    DiscretizedControlProblem p{ChainSystem::lambda(k, a), free_stokes ? OracleModel::three_level_free_stokes
                                                                        : OracleModel::three_level,
                                T, n, {}, 1};
    p.bounds.assign(free_stokes ? 2 : 1, {0.0, 1.0});
    p.validate();
    return p;
  }
  static DiscretizedControlProblem four_level(double k, double a, double T, std::size_t n) {
    DiscretizedControlProblem p{ChainSystem::four_level(k, a), OracleModel::four_level, T, n, {}, 1};
    p.bounds.assign(2, {0.0, 1.0});
    p.validate();
    return p;
  }
  static DiscretizedControlProblem five_chain(double k, double a, double T, std::size_t n) {
    DiscretizedControlProblem p{ChainSystem::chain(5, k, a), OracleModel::five_chain, T, n, {}, 2};
    p.bounds.assign(4, {0.0, 1.0});
    p.validate();
    return p;
  }

  void validate() const {
    detail::require(n_segments >= 1, "need at least one segment");
    detail::require(horizon > 0 && std::isfinite(horizon), "horizon must be positive");
    detail::require(bounds.size() == channels(), "one bound pair per channel required");
    for (auto [lo, hi] : bounds) detail::require(lo <= hi, "channel bounds reversed");
    const std::size_t need = model == OracleModel::five_chain ? 5 : model == OracleModel::four_level ? 4 : 3;
    detail::require(sys.levels() == need, "chain length does not match the oracle model");
    detail::require(target < state_dim(), "target index out of range");
  }

  std::size_t channels() const {
    switch (model) {
      case OracleModel::three_level: return 1;
      case OracleModel::five_chain: return 4;
      default: return 2;
    }
  }
  std::size_t state_dim() const { return model == OracleModel::five_chain ? 3 : 2; }
  std::size_t dimension() const { return n_segments * channels(); }
  double segment_length() const { return horizon / static_cast<double>(n_segments); }

  // Generator for one segment (2x2 models use the leading block).
  Eigen::Matrix3d generator(std::span<const double> v) const {
    const double a = sys.bound();
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    switch (model) {
      case OracleModel::three_level:
      case OracleModel::three_level_free_stokes: {
        const double u = v[0], s = model == OracleModel::three_level ? 1.0 : v[1];
        m(0, 0) = -sys.decay(1) * u * u;
        m(0, 1) = -a * s * u;
        m(1, 0) = a * s * u;
        break;
      }
      case OracleModel::four_level: {
        const double u1 = v[0], u2 = v[1];
        m(0, 0) = -sys.decay(1) * u1 * u1;
        m(0, 1) = -a * u1 * u2;
        m(1, 0) = a * u1 * u2;
        m(1, 1) = -sys.decay(2) * u2 * u2;
        break;
      }
      case OracleModel::five_chain: {
        const double u1 = v[0], w1 = v[1], w2 = v[2], u3 = v[3];
        m(0, 0) = -sys.decay(1) * u1 * u1;
        m(0, 1) = -w1 * a * u1;
        m(1, 0) = w1 * a * u1;
        m(1, 1) = -sys.decay(2);
        m(1, 2) = -w2 * a * u3;
        m(2, 1) = w2 * a * u3;
        m(2, 2) = -sys.decay(3) * u3 * u3;
        break;
      }
    }
    return m;
  }

  Eigen::Matrix3d segment_exp(std::span<const double> v) const {
    const Eigen::Matrix3d m = generator(v);
    const double h = segment_length();
    if (state_dim() == 3) return expm3(m, h);
    Eigen::Matrix3d e = Eigen::Matrix3d::Zero();
    e.topLeftCorner<2, 2>() = expm2(m.topLeftCorner<2, 2>(), h);
    e(2, 2) = 1.0;
    return e;
  }

  // Terminal amplitude of the target component from (1, 0, 0).
  double evaluate(std::span<const double> values) const {
    detail::require(values.size() == dimension(), "value vector has wrong length");
    Eigen::Vector3d x(1.0, 0.0, 0.0);
    const std::size_t c = channels();
    for (std::size_t j = 0; j < n_segments; ++j) x = segment_exp(values.subspan(j * c, c)) * x;
    return x(static_cast<Eigen::Index>(target));
  }

  bool admissible(std::span<const double> values) const {
    if (values.size() != dimension()) return false;
    const std::size_t c = channels();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto [lo, hi] = bounds[i % c];
      if (!(values[i] >= lo && values[i] <= hi)) return false;
    }
    return true;
  }

  std::vector<double> project(std::vector<double> v) const {
    const std::size_t c = channels();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i], bounds[i % c].first, bounds[i % c].second);
    return v;
  }

  // Samples a function of time at segment midpoints.
  template <class F>
  std::vector<double> sample(F&& f) const {
    std::vector<double> v(dimension());
    const std::size_t c = channels();
    std::vector<double> buf(c);
    for (std::size_t j = 0; j < n_segments; ++j) {
      f((static_cast<double>(j) + 0.5) * segment_length(), std::span<double>(buf));
      for (std::size_t i = 0; i < c; ++i) v[j * c + i] = buf[i];
    }
    return project(std::move(v));
  }

  std::vector<std::string> channel_names() const {
    switch (model) {
      case OracleModel::three_level: return {"u"};
      case OracleModel::three_level_free_stokes: return {"u", "s"};
      case OracleModel::four_level: return {"u1", "u2"};
      default: return {"u1", "w1", "w2", "u3"};
    }
  }

  ControlSchedule to_schedule(std::span<const double> values) const {
    detail::require(values.size() == dimension(), "value vector has wrong length");
    const std::size_t c = channels();
    std::vector<double> grid(n_segments + 1);
    for (std::size_t j = 0; j <= n_segments; ++j) grid[j] = horizon * static_cast<double>(j) / static_cast<double>(n_segments);
    grid.back() = horizon;
    std::vector<std::vector<double>> vals(c, std::vector<double>(n_segments + 1));
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < n_segments; ++j) vals[i][j] = values[j * c + i];
      vals[i][n_segments] = vals[i][n_segments - 1];
    }
    ControlSchedule s(std::move(grid), channel_names(), std::move(vals), Interpolation::constant);
    for (std::size_t i = 0; i < c; ++i) s.set_bound(i, std::max(std::abs(bounds[i].first), std::abs(bounds[i].second)));
    return s;
  }
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}
// uniform double in [0, 1) from the top 53 bits; portable across standard libraries
inline double unit(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }
}  // namespace detail

// Stratified admissible sample: stratum 0 uniform, 1 bang-bang, 2 monotone
// non-decreasing per channel.
inline std::vector<double> random_controls(const DiscretizedControlProblem& p, std::mt19937_64& g, int stratum) {
  const std::size_t c = p.channels(), n = p.n_segments;
  std::vector<double> v(p.dimension());
  for (std::size_t i = 0; i < c; ++i) {
    const auto [lo, hi] = p.bounds[i];
    std::vector<double> col(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double r = detail::unit(g);
      col[j] = stratum == 1 ? (r < 0.5 ? lo : hi) : lo + (hi - lo) * r;
    }
    if (stratum == 2) std::sort(col.begin(), col.end());
    for (std::size_t j = 0; j < n; ++j) v[j * c + i] = col[j];
  }
  return v;
}

struct SearchResult {
  double best_efficiency = -std::numeric_limits<double>::infinity();
  std::vector<double> best_values;
  std::size_t best_trial = 0;
  std::size_t n_trials = 0;
};

// Trials are independent (each has its own generator derived from seed and
// index) and are reduced in index order, so the result does not depend on
// the thread count.
inline SearchResult random_search(const DiscretizedControlProblem& p, std::size_t n_trials, std::uint64_t seed,
                                  unsigned threads = 0) {
  detail::require(n_trials >= 1, "need at least one trial");
  p.validate();
  std::vector<double> score(n_trials);
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto g = detail::trial_rng(seed, i);
      score[i] = p.evaluate(random_controls(p, g, static_cast<int>(i % 3)));
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_trials));
  if (threads <= 1) {
    run(0, n_trials);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_trials + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(n_trials, b + chunk);
      if (b < e) pool.emplace_back(run, b, e);
    }
    for (auto& th : pool) th.join();
  }
  SearchResult r;
  r.n_trials = n_trials;
  for (std::size_t i = 0; i < n_trials; ++i)
    if (score[i] > r.best_efficiency) {
      r.best_efficiency = score[i];
      r.best_trial = i;
    }
  auto g = detail::trial_rng(seed, r.best_trial);
  r.best_values = random_controls(p, g, static_cast<int>(r.best_trial % 3));
  return r;
}

struct AscentOptions {
  std::size_t max_iterations = 2000;
  double fd_step = 1e-6;    // relative
  double tolerance = 1e-10;  // stop when an accepted step gains less
};

struct AscentResult {
  std::vector<double> values;
  double efficiency = 0.0;
  double initial_efficiency = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {
// Central-difference gradient. Perturbing segment j only changes its own
// exponential, so J(v +- h e) = lambda_j^T E_j(v +- h e) x_{j-1}.
inline std::vector<double> fd_gradient(const DiscretizedControlProblem& p, const std::vector<double>& v, double rel) {
  const std::size_t n = p.n_segments, c = p.channels();
  std::vector<Eigen::Vector3d> x(n + 1), lam(n + 1);
  std::vector<Eigen::Matrix3d> e(n);
  x[0] = Eigen::Vector3d(1.0, 0.0, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = p.segment_exp(std::span<const double>(v).subspan(j * c, c));
    x[j + 1] = e[j] * x[j];
  }
  lam[n] = Eigen::Vector3d::Zero();
  lam[n](static_cast<Eigen::Index>(p.target)) = 1.0;
  for (std::size_t j = n; j-- > 0;) lam[j] = e[j].transpose() * lam[j + 1];
  std::vector<double> g(v.size());
  std::vector<double> seg(c);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < c; ++i) {
      std::copy(v.begin() + static_cast<std::ptrdiff_t>(j * c), v.begin() + static_cast<std::ptrdiff_t>((j + 1) * c),
                seg.begin());
      const double h = rel * std::max(1.0, std::abs(seg[i]));
      const double base = seg[i];
      seg[i] = base + h;
      const double fp = lam[j + 1].dot(p.segment_exp(seg) * x[j]);
      seg[i] = base - h;
      const double fm = lam[j + 1].dot(p.segment_exp(seg) * x[j]);
      g[j * c + i] = (fp - fm) / (2 * h);
    }
  return g;
}
}  // namespace detail

// Projected gradient ascent with Barzilai-Borwein step lengths and
// backtracking; only strictly improving steps are accepted.
inline AscentResult local_ascent(const DiscretizedControlProblem& p, std::vector<double> init,
                                 const AscentOptions& opt = {}) {
  p.validate();
  detail::require(p.admissible(init), "initial controls are not admissible");
  auto eval = [&](const std::vector<double>& v) {
    const double f = p.evaluate(v);
    if (!std::isfinite(f)) throw numerical_error("non-finite objective during local ascent");
    return f;
  };
  AscentResult r;
  r.values = std::move(init);
  r.efficiency = r.initial_efficiency = eval(r.values);
  std::vector<double> g = detail::fd_gradient(p, r.values, opt.fd_step);
  double gmax = 0;
  for (double x : g) gmax = std::max(gmax, std::abs(x));
  double alpha = gmax > 0 ? 0.1 / gmax : 1.0;

  for (r.iterations = 0; r.iterations < opt.max_iterations; ++r.iterations) {
    std::vector<double> cand;
    double fc = r.efficiency;
    bool accepted = false, stalled = false;
    for (int bt = 0; bt < 60; ++bt) {
      cand = r.values;
      for (std::size_t i = 0; i < cand.size(); ++i) cand[i] += alpha * g[i];
      cand = p.project(std::move(cand));
      if (cand == r.values) {
        stalled = true;
        break;
      }
      fc = eval(cand);
      if (fc > r.efficiency) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted || stalled) {
      r.converged = true;
      break;
    }
    const double gain = fc - r.efficiency;
    std::vector<double> gn = detail::fd_gradient(p, cand, opt.fd_step);
    double ss = 0, sy = 0;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      const double s = cand[i] - r.values[i], y = gn[i] - g[i];
      ss += s * s;
      sy += s * y;
    }
    alpha = sy < 0 ? std::clamp(ss / -sy, 1e-12, 1e8) : std::min(alpha * 4, 1e8);
    r.values = std::move(cand);
    r.efficiency = fc;
    g = std::move(gn);
    if (gain < opt.tolerance) {
      r.converged = true;
      ++r.iterations;
      break;
    }
  }
  return r;
}

struct RefinementReport {
  std::vector<std::size_t> counts;
  std::vector<double> efficiencies;
  bool monotone = true;  // non-decreasing within 1e-8
};

// Best efficiency at increasing resolution. The coarsest level starts from
// the best random sample; each finer level starts from the previous optimum
// carried over to the new grid, then ascends.
inline RefinementReport refine_and_extrapolate(const DiscretizedControlProblem& base, std::vector<std::size_t> counts,
                                               std::uint64_t seed, std::size_t trials = 200,
                                               const AscentOptions& opt = {}) {
  detail::require(!counts.empty(), "need at least one segment count");
  for (std::size_t i = 1; i < counts.size(); ++i)
    detail::require(counts[i] > counts[i - 1], "segment counts must be ascending");
  RefinementReport rep;
  rep.counts = counts;
  std::vector<double> prev;
  std::size_t prev_n = 0;
  for (std::size_t n : counts) {
    DiscretizedControlProblem p = base;
    p.n_segments = n;
    p.validate();
    std::vector<double> init;
    if (prev.empty()) {
      init = random_search(p, trials, seed).best_values;
    } else {
      const std::size_t c = p.channels();
      init.resize(p.dimension());
      for (std::size_t j = 0; j < n; ++j) {
        // segment of the coarse grid containing the fine midpoint
        const std::size_t src = std::min(prev_n - 1, (2 * j + 1) * prev_n / (2 * n));
        for (std::size_t i = 0; i < c; ++i) init[j * c + i] = prev[src * c + i];
      }
    }
    AscentResult a = local_ascent(p, init, opt);
    if (!rep.efficiencies.empty() && a.efficiency < rep.efficiencies.back() - 1e-8) rep.monotone = false;
    rep.efficiencies.push_back(a.efficiency);
    prev = std::move(a.values);
    prev_n = n;
  }
  return rep;
}

}  // namespace relaxfree
