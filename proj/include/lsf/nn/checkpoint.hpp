#pragma once

#include <iosfwd>
#include <string>

#include "lsf/nn/mlp.hpp"

namespace lsf::nn {

// "ASNN" network checkpoint: u32 layer count, then per layer u32 rows,
// u32 cols, u8 activation tag, u8 LayerNorm flag, and f32 arrays for the
// row-major weight, bias, and (when flagged) gain and offset.
// Input dimension is the first layer's column count.
void write_mlp(std::ostream& out, const MlpF& net);
MlpF read_mlp(std::istream& in);

void save_mlp(const std::string& path, const MlpF& net);
MlpF load_mlp(const std::string& path);

std::string serialize_mlp(const MlpF& net);
// FNV-1a of the serialized bytes.
std::uint64_t mlp_checksum(const MlpF& net);

}  // namespace lsf::nn
