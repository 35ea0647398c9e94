#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "privsec/error.hpp"

namespace privsec {

/// Lower real branch W_{-1}(z) for z in [-1/e, 0).
///
/// Starting point: branch-point series in p = -sqrt(2(1 + e z)) near -1/e,
/// asymptotic log expansion elsewhere. Refined with Halley steps on
/// w e^w - z. Relative error is below 1e-12 across the domain.
inline double lambert_wm1(double z) {
  constexpr double kInvE = 1.0 / std::numbers::e;
  if (!(z >= -kInvE - 1e-15) || !(z < 0.0)) {
    throw ValidationError("lambert_wm1: argument outside [-1/e, 0)");
  }
  const double q = 1.0 + std::numbers::e * z;
  if (q <= 0.0) return -1.0;
  const double p = -std::sqrt(2.0 * q);
  if (p > -1e-3) {
    // Close to the branch point Halley loses accuracy; the series is exact
    // to O(p^6) here.
    return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p - 43.0 / 540.0 * p * p * p * p +
           769.0 / 17280.0 * p * p * p * p * p;
  }
  double w;
  if (z < -0.25) {
    w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p - 43.0 / 540.0 * p * p * p * p;
  } else {
    const double l1 = std::log(-z);
    const double l2 = std::log(-l1);
    w = l1 - l2 + l2 / l1 + l2 * (l2 - 2.0) / (2.0 * l1 * l1);
  }
  for (int it = 0; it < 64; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - z;
    const double wp1 = w + 1.0;
    const double step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
    w -= step;
    if (std::abs(step) <= 4 * std::numeric_limits<double>::epsilon() * std::abs(w)) break;
  }
  return w;
}

}  // namespace privsec
