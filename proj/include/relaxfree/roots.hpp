#pragma once
// Bracketed scalar root finding.

#include <cmath>
#include <string>

#include "relaxfree/errors.hpp"

namespace relaxfree {

// Bisection on [lo, hi] where g(lo) and g(hi) have opposite signs (either
// endpoint may be omitted from evaluation by passing its known sign). Runs
// until the bracket width is below `tol` or no representable midpoint remains.
template <class G>
double bisect(G&& g, double lo, double hi, double tol = 1e-14, int sign_lo = 0) {
  if (lo > hi) std::swap(lo, hi);
  const double glo = sign_lo != 0 ? static_cast<double>(sign_lo) : g(lo);
  if (glo == 0) return lo;
  const bool lo_neg = glo < 0;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi || hi - lo <= tol) return mid;
    const double gm = g(mid);
    if (!std::isfinite(gm)) throw numerical_error("non-finite residual during bisection at " + std::to_string(mid));
    if (gm == 0) return mid;
    if ((gm < 0) == lo_neg) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace relaxfree
