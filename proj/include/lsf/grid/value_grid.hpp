#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsf/sim/dubins.hpp"

namespace lsf::grid {

// Axis layout: x and y nodes include both endpoints; theta has nθ nodes at
// theta_min + k * (2π / nθ) and wraps.
struct GridSpec {
  int nx = 61;
  int ny = 61;
  int ntheta = 61;
  double x_min = -1.5;
  double x_max = 1.5;
  double y_min = -1.5;
  double y_max = 1.5;
  double theta_min = -3.14159265358979323846;

  void validate() const;
  std::size_t node_count() const { return static_cast<std::size_t>(nx) * ny * ntheta; }
  double dx() const { return (x_max - x_min) / (nx - 1); }
  double dy() const { return (y_max - y_min) / (ny - 1); }
  double dtheta() const;
  double x_at(int i) const { return x_min + i * dx(); }
  double y_at(int j) const { return y_min + j * dy(); }
  double theta_at(int k) const { return theta_min + k * dtheta(); }
  std::size_t flat(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * ny + static_cast<std::size_t>(j)) * ntheta + static_cast<std::size_t>(k);
  }
  sim::PrivilegedState node_state(std::size_t flat_index) const;

  static GridSpec cube(int n, double bound = 1.5);
};

// n values evenly spaced over [-a_max, a_max]; n = 1 gives {0}.
std::vector<double> action_set(int n_actions, double a_max);

// Descriptor of the disc failure margin a grid was solved for.
struct MarginDescriptor {
  double epsilon = 0.5;
  double cx = 0.0;
  double cy = 0.0;
};

struct ValueGrid {
  GridSpec spec;
  std::vector<double> values;
  double gamma = 0.9999;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::optional<MarginDescriptor> margin;

  double node(int i, int j, int k) const { return values[spec.flat(i, j, k)]; }
};

// Trilinear interpolation; x/y clamped to the extents, theta periodic.
double value_at(const ValueGrid& g, const sim::PrivilegedState& s);

// unsafe[n] = 1 iff values[n] < threshold.
std::vector<std::uint8_t> classify_nodes(const ValueGrid& g, double threshold);

void write_value_grid(const std::string& path, const ValueGrid& g);
ValueGrid read_value_grid(const std::string& path);

}  // namespace lsf::grid
