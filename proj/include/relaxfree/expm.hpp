#pragma once
// Small dense matrix exponentials used by closed forms and the discretized oracle.

#include <cmath>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace relaxfree {

// exp(M s) for a real 2x2 matrix, via the shifted form e^{mu s}(C I + S N),
// N = M - mu I, N^2 = delta2 I.
inline Eigen::Matrix2d expm2(const Eigen::Matrix2d& m, double s) {
  const double mu = 0.5 * (m(0, 0) + m(1, 1));
  const double half = 0.5 * (m(0, 0) - m(1, 1));
  const double delta2 = half * half + m(0, 1) * m(1, 0);
  double c = 1.0, sc = s;
  if (delta2 > 0) {
    const double d = std::sqrt(delta2);
    c = std::cosh(d * s);
    sc = std::sinh(d * s) / d;
  } else if (delta2 < 0) {
    const double d = std::sqrt(-delta2);
    c = std::cos(d * s);
    sc = std::sin(d * s) / d;
  }
  Eigen::Matrix2d n = m;
  n(0, 0) -= mu;
  n(1, 1) -= mu;
  return std::exp(mu * s) * (c * Eigen::Matrix2d::Identity() + sc * n);
}

inline Eigen::Matrix3d expm3(const Eigen::Matrix3d& m, double s) {
  const Eigen::Matrix3d ms = m * s;
  return ms.exp();
}

}  // namespace relaxfree
