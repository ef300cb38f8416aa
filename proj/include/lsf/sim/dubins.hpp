#pragma once

#include <cstdint>
#include <vector>

namespace lsf::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Privileged Dubins state. Only sim-core, the grid oracle, and the evaluation
// harness may look inside; the filter sees encodings of it.
struct PrivilegedState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // radians, kept in [-pi, pi)

  Vec2 position() const { return {x, y}; }
};

struct DubinsParams {
  double v = 1.0;          // m/s
  double dt = 0.05;        // s
  double a_max = 1.25;     // rad/s
  double bound = 1.5;      // box is [-bound, bound]^2
  int horizon = 100;       // steps per episode

  void validate() const;
};

struct FailureDisc {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.5;
};

// One Euler step s' = s + dt [v cos(theta), v sin(theta), a]; theta wrapped.
// Throws std::invalid_argument when |a| > a_max.
PrivilegedState step(const PrivilegedState& s, double a, const DubinsParams& p);

bool in_bounds(const PrivilegedState& s, const DubinsParams& p);

// max(1 - d^2 / sqrt(2), -1) with d the Euclidean distance between positions.
double ground_truth_similarity(Vec2 p1, Vec2 p2);

// ||p - c|| - radius: negative inside the disc.
double signed_distance_margin(const PrivilegedState& s, const FailureDisc& disc);

// Similarity value at which the ground-truth score crosses distance eps.
inline double similarity_at_distance(double eps) { return 1.0 - eps * eps / 1.4142135623730951; }

}  // namespace lsf::sim
