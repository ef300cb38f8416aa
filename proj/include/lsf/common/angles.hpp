#pragma once

#include <cmath>
#include <numbers>

namespace lsf {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Wraps an angle into [-pi, pi). Every module uses this convention.
inline double wrap_angle(double theta) {
  double wrapped = std::fmod(theta + kPi, kTwoPi);
  if (wrapped < 0.0) wrapped += kTwoPi;
  wrapped -= kPi;
  // fmod can land exactly on +pi after the shift for inputs like -pi - 2^-52.
  if (wrapped >= kPi) wrapped -= kTwoPi;
  return wrapped;
}

}  // namespace lsf
