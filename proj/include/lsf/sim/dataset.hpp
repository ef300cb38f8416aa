#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsf/sim/dubins.hpp"

namespace lsf::sim {

struct Trajectory {
  std::vector<PrivilegedState> states;
  std::vector<double> actions;  // angular velocities, one per transition
  bool terminated_out_of_bounds = false;

  std::size_t step_count() const { return actions.size(); }
};

using Dataset = std::vector<Trajectory>;

// Random-action episodes from uniform starts in the box with uniform heading.
// Episode i draws from its own substream (seed, i), so the result does not
// depend on generation order.
Dataset generate_dataset(std::size_t n_episodes, const DubinsParams& p, std::uint64_t seed);

Trajectory generate_episode(const DubinsParams& p, std::uint64_t seed, std::uint64_t episode);

// Flat view over every stored state, for uniform (trajectory, timestep) draws.
class StateIndex {
 public:
  explicit StateIndex(const Dataset& data);

  std::size_t size() const { return total_; }
  const PrivilegedState& at(std::size_t flat) const;

 private:
  const Dataset* data_;
  std::vector<std::size_t> offsets_;  // cumulative state counts
  std::size_t total_ = 0;
};

// "ASD1" format: u32 episode count, then per episode u32 step count, the
// step_count + 1 states as f32 (x, y, theta), the step_count actions as f32,
// and a u8 out-of-bounds flag. Little-endian throughout.
void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(const std::string& path);

}  // namespace lsf::sim
