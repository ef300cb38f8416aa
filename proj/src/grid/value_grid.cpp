#include "lsf/grid/value_grid.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "lsf/common/angles.hpp"
#include "lsf/common/binary_io.hpp"
#include "lsf/grid/bellman.hpp"

namespace lsf::grid {

void GridSpec::validate() const {
  if (nx < 2 || ny < 2 || ntheta < 1) throw std::invalid_argument("GridSpec: need nx, ny >= 2 and ntheta >= 1");
  if (!(x_max > x_min) || !(y_max > y_min)) throw std::invalid_argument("GridSpec: empty extents");
}

double GridSpec::dtheta() const { return kTwoPi / ntheta; }

sim::PrivilegedState GridSpec::node_state(std::size_t flat_index) const {
  const auto k = static_cast<int>(flat_index % static_cast<std::size_t>(ntheta));
  const std::size_t ij = flat_index / static_cast<std::size_t>(ntheta);
  const auto j = static_cast<int>(ij % static_cast<std::size_t>(ny));
  const auto i = static_cast<int>(ij / static_cast<std::size_t>(ny));
  return {x_at(i), y_at(j), theta_at(k)};
}

GridSpec GridSpec::cube(int n, double bound) {
  GridSpec s;
  s.nx = s.ny = s.ntheta = n;
  s.x_min = s.y_min = -bound;
  s.x_max = s.y_max = bound;
  return s;
}

std::vector<double> action_set(int n_actions, double a_max) {
  if (n_actions < 1) throw std::invalid_argument("action_set: need at least one action");
  if (n_actions == 1) return {0.0};
  std::vector<double> a(static_cast<std::size_t>(n_actions));
  for (int i = 0; i < n_actions; ++i) a[static_cast<std::size_t>(i)] = -a_max + 2.0 * a_max * i / (n_actions - 1);
  if (n_actions % 2 == 1) a[static_cast<std::size_t>(n_actions / 2)] = 0.0;
  a.back() = a_max;
  return a;
}

double value_at(const ValueGrid& g, const sim::PrivilegedState& s) {
  return interpolation_stencil(g.spec, s).apply(g.values);
}

std::vector<std::uint8_t> classify_nodes(const ValueGrid& g, double threshold) {
  std::vector<std::uint8_t> unsafe(g.values.size());
  for (std::size_t n = 0; n < g.values.size(); ++n) unsafe[n] = g.values[n] < threshold ? 1 : 0;
  return unsafe;
}

namespace {
constexpr const char* kMagic = "ASVG";
constexpr const char* kTrailer = "ASVM";
}  // namespace

void write_value_grid(const std::string& path, const ValueGrid& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  io::write_magic(out, kMagic);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.spec.nx));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.spec.ny));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.spec.ntheta));
  for (double e : {g.spec.x_min, g.spec.x_max, g.spec.y_min, g.spec.y_max, g.spec.theta_min, g.spec.theta_min + kTwoPi}) {
    io::write_le<float>(out, static_cast<float>(e));
  }
  io::write_le<float>(out, static_cast<float>(g.gamma));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.iterations));
  io::write_le<float>(out, static_cast<float>(g.residual));
  for (double v : g.values) io::write_le<float>(out, static_cast<float>(v));
  if (g.margin) {
    io::write_magic(out, kTrailer);
    io::write_le<float>(out, static_cast<float>(g.margin->epsilon));
    io::write_le<float>(out, static_cast<float>(g.margin->cx));
    io::write_le<float>(out, static_cast<float>(g.margin->cy));
    io::write_le<std::uint8_t>(out, g.converged ? 1 : 0);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ValueGrid read_value_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  io::expect_magic(in, kMagic);
  ValueGrid g;
  g.spec.nx = static_cast<int>(io::read_le<std::uint32_t>(in));
  g.spec.ny = static_cast<int>(io::read_le<std::uint32_t>(in));
  g.spec.ntheta = static_cast<int>(io::read_le<std::uint32_t>(in));
  g.spec.x_min = io::read_le<float>(in);
  g.spec.x_max = io::read_le<float>(in);
  g.spec.y_min = io::read_le<float>(in);
  g.spec.y_max = io::read_le<float>(in);
  g.spec.theta_min = io::read_le<float>(in);
  io::read_le<float>(in);  // theta max, implied by periodicity
  g.spec.validate();
  if (g.spec.node_count() > (std::size_t{1} << 30)) throw io::FormatError("ASVG: implausible grid size");
  g.gamma = io::read_le<float>(in);
  g.iterations = static_cast<int>(io::read_le<std::uint32_t>(in));
  g.residual = io::read_le<float>(in);
  g.values.resize(g.spec.node_count());
  for (double& v : g.values) v = io::read_le<float>(in);
  g.converged = true;
  if (in.peek() != std::char_traits<char>::eof()) {
    io::expect_magic(in, kTrailer);
    MarginDescriptor m;
    m.epsilon = io::read_le<float>(in);
    m.cx = io::read_le<float>(in);
    m.cy = io::read_le<float>(in);
    g.margin = m;
    g.converged = io::read_le<std::uint8_t>(in) != 0;
  }
  return g;
}

}  // namespace lsf::grid
