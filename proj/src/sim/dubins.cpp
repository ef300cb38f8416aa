#include "lsf/sim/dubins.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lsf/common/angles.hpp"

namespace lsf::sim {

void DubinsParams::validate() const {
  if (!(v > 0.0) || !(dt > 0.0) || !(a_max > 0.0) || !(bound > 0.0) || horizon < 1) {
    throw std::invalid_argument("DubinsParams: v, dt, a_max, bound must be positive and horizon >= 1");
  }
}

PrivilegedState step(const PrivilegedState& s, double a, const DubinsParams& p) {
  if (!(std::abs(a) <= p.a_max * (1.0 + 1e-12))) {
    throw std::invalid_argument("action " + std::to_string(a) + " outside [-a_max, a_max]");
  }
  PrivilegedState next;
  next.x = s.x + p.dt * p.v * std::cos(s.theta);
  next.y = s.y + p.dt * p.v * std::sin(s.theta);
  next.theta = wrap_angle(s.theta + p.dt * a);
  return next;
}

bool in_bounds(const PrivilegedState& s, const DubinsParams& p) {
  return std::abs(s.x) <= p.bound && std::abs(s.y) <= p.bound;
}

double ground_truth_similarity(Vec2 p1, Vec2 p2) {
  const double dx = p1.x - p2.x;
  const double dy = p1.y - p2.y;
  const double d2 = dx * dx + dy * dy;
  return std::max(1.0 - d2 / std::sqrt(2.0), -1.0);
}

double signed_distance_margin(const PrivilegedState& s, const FailureDisc& disc) {
  return std::hypot(s.x - disc.cx, s.y - disc.cy) - disc.radius;
}

}  // namespace lsf::sim
