#include "lsf/sim/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "lsf/common/angles.hpp"
#include "lsf/common/binary_io.hpp"
#include "lsf/common/rng.hpp"

namespace lsf::sim {

Trajectory generate_episode(const DubinsParams& p, std::uint64_t seed, std::uint64_t episode) {
  Rng rng = substream(seed, episode);
  Trajectory traj;
  PrivilegedState s;
  s.x = uniform(rng, -p.bound, p.bound);
  s.y = uniform(rng, -p.bound, p.bound);
  s.theta = wrap_angle(uniform(rng, -kPi, kPi));
  traj.states.push_back(s);
  for (int t = 0; t < p.horizon; ++t) {
    const double a = uniform(rng, -p.a_max, p.a_max);
    s = step(s, a, p);
    traj.actions.push_back(a);
    traj.states.push_back(s);
    if (!in_bounds(s, p)) {
      traj.terminated_out_of_bounds = true;
      break;
    }
  }
  return traj;
}

Dataset generate_dataset(std::size_t n_episodes, const DubinsParams& p, std::uint64_t seed) {
  p.validate();
  if (n_episodes < 1) throw std::invalid_argument("generate_dataset: n_episodes must be >= 1");
  Dataset data;
  data.reserve(n_episodes);
  for (std::size_t i = 0; i < n_episodes; ++i) data.push_back(generate_episode(p, seed, i));
  return data;
}

StateIndex::StateIndex(const Dataset& data) : data_(&data) {
  offsets_.reserve(data.size() + 1);
  offsets_.push_back(0);
  for (const auto& traj : data) offsets_.push_back(offsets_.back() + traj.states.size());
  total_ = offsets_.back();
  if (total_ == 0) throw std::invalid_argument("StateIndex: dataset has no states");
}

const PrivilegedState& StateIndex::at(std::size_t flat) const {
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat);
  const auto episode = static_cast<std::size_t>(std::distance(offsets_.begin(), it)) - 1;
  return (*data_)[episode].states[flat - offsets_[episode]];
}

void write_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  io::write_magic(out, "ASD1");
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.size()));
  for (const auto& traj : data) {
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(traj.step_count()));
    for (const auto& s : traj.states) {
      io::write_le<float>(out, static_cast<float>(s.x));
      io::write_le<float>(out, static_cast<float>(s.y));
      io::write_le<float>(out, static_cast<float>(s.theta));
    }
    for (double a : traj.actions) io::write_le<float>(out, static_cast<float>(a));
    io::write_le<std::uint8_t>(out, traj.terminated_out_of_bounds ? 1 : 0);
  }
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  io::expect_magic(in, "ASD1");
  const auto count = io::read_le<std::uint32_t>(in);
  Dataset data(count);
  for (auto& traj : data) {
    const auto steps = io::read_le<std::uint32_t>(in);
    traj.states.resize(steps + 1);
    for (auto& s : traj.states) {
      s.x = io::read_le<float>(in);
      s.y = io::read_le<float>(in);
      s.theta = io::read_le<float>(in);
    }
    traj.actions.resize(steps);
    for (auto& a : traj.actions) a = io::read_le<float>(in);
    traj.terminated_out_of_bounds = io::read_le<std::uint8_t>(in) != 0;
  }
  return data;
}

}  // namespace lsf::sim
