#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "reasonforge/error.hpp"

namespace reasonforge {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw validation_error("vector dimension mismatch: " + std::to_string(a.size()) + " vs " +
                           std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline constexpr double kNormEps = 1e-12;

/// L2-normalizes in place; below kNormEps the vector is left unscaled and
/// false is returned so callers can flag the degenerate case.
inline bool normalize_inplace(Vec& a) {
  const double n = norm2(a);
  if (n < kNormEps) return false;
  for (double& x : a) x /= n;
  return true;
}

inline Vec normalized(Vec a) {
  normalize_inplace(a);
  return a;
}

}  // namespace reasonforge
