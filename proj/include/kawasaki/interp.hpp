#pragma once

// Cubic Hermite pieces on uniform grids.

#include <vector>

namespace kawasaki {

/// Monotone (Fritsch-Carlson harmonic-mean) node slopes.
inline std::vector<double> pchip_slopes(const std::vector<double>& y, double h) {
  const std::size_t n = y.size();
  std::vector<double> m(n, 0.0);
  if (n < 2) return m;
  std::vector<double> delta(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) delta[k] = (y[k + 1] - y[k]) / h;
  m[0] = delta[0];
  m[n - 1] = delta[n - 2];
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double a = delta[k - 1];
    const double b = delta[k];
    m[k] = (a * b > 0.0) ? 2.0 * a * b / (a + b) : 0.0;
  }
  return m;
}

/// Hermite interpolant on [0, h] at relative position t in [0,1].
inline double hermite(double y0, double y1, double m0, double m1, double h, double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 +
         (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1;
}

/// d/dx of the same interpolant.
inline double hermite_slope(double y0, double y1, double m0, double m1, double h,
                            double t) {
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * y0 + (-6 * t2 + 6 * t) * y1) / h +
         (3 * t2 - 4 * t + 1) * m0 + (3 * t2 - 2 * t) * m1;
}

}  // namespace kawasaki
