#pragma once

#include <cstdint>
#include <string_view>

namespace lsf {

// FNV-1a, 64-bit. Used to tie thresholds and filter checkpoints to the exact
// projector bytes they were produced with.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace lsf
