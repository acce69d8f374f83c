#pragma once

#include <algorithm>
#include <cmath>
#include <string>

namespace zoomrds {

enum class PhaseSpace { interval, circle };

inline std::string to_string(PhaseSpace p) { return p == PhaseSpace::circle ? "circle" : "interval"; }

// Representative of x in [0, 1).
inline double wrap_unit(double x) {
  double y = x - std::floor(x);
  if (y >= 1.0) y = 0.0;
  return y;
}

// Signed representative of x in [-1/2, 1/2).
inline double wrap_signed(double x) { return x - std::floor(x + 0.5); }

inline double distance(PhaseSpace phase, double x, double y) {
  const double d = std::abs(x - y);
  if (phase == PhaseSpace::interval) return d;
  const double m = d - std::floor(d);
  return std::min(m, 1.0 - m);
}

inline double normalize(PhaseSpace phase, double x) {
  return phase == PhaseSpace::circle ? wrap_unit(x) : std::clamp(x, 0.0, 1.0);
}

}  // namespace zoomrds
