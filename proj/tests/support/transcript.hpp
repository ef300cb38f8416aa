#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Helpers for driving the teleoperation server over a real socket.
namespace lsf::checks {

// Deterministic mixed transcript of `n` client messages (resets, constraint
// moves, actions including out-of-range ones, α/ε changes, heatmaps and a few
// malformed lines).
std::vector<std::string> make_transcript(int n, std::uint64_t seed);

// Opens one connection to 127.0.0.1:port, sends each line, and collects one
// response line per request.
std::vector<std::string> replay_over_tcp(int port, const std::vector<std::string>& lines);

}  // namespace lsf::checks
