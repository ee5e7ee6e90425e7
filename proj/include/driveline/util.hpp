#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace driveline {

inline constexpr double kPi = 3.14159265358979323846;

// Wraps an angle into (-pi, pi]. -pi maps to +pi.
inline double wrap_angle(double theta) {
  double t = std::fmod(theta + kPi, 2.0 * kPi);
  if (t <= 0.0) t += 2.0 * kPi;
  return t - kPi;
}

// Rounds through a 6-significant-digit decimal representation. All numeric
// CLI output goes through this so reports are stable byte-for-byte.
inline double sig6(double x) {
  if (!std::isfinite(x)) return x;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return std::stod(buf);
}

inline double clamp(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

}  // namespace driveline
