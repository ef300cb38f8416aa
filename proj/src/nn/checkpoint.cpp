#include "lsf/nn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "lsf/common/binary_io.hpp"
#include "lsf/common/checksum.hpp"

namespace lsf::nn {

void write_mlp(std::ostream& out, const MlpF& net) {
  io::write_magic(out, "ASNN");
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.rows()));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.cols()));
    io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(l.activation));
    io::write_le<std::uint8_t>(out, l.layer_norm ? 1 : 0);
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) io::write_le<float>(out, l.weight(r, c));
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) io::write_le<float>(out, l.bias(i));
    if (l.layer_norm) {
      for (Eigen::Index i = 0; i < l.gain.size(); ++i) io::write_le<float>(out, l.gain(i));
      for (Eigen::Index i = 0; i < l.offset.size(); ++i) io::write_le<float>(out, l.offset(i));
    }
  }
}

MlpF read_mlp(std::istream& in) {
  io::expect_magic(in, "ASNN");
  const auto count = io::read_le<std::uint32_t>(in);
  std::vector<DenseLayer<float>> layers;
  int input_dim = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto rows = io::read_le<std::uint32_t>(in);
    const auto cols = io::read_le<std::uint32_t>(in);
    const auto act = io::read_le<std::uint8_t>(in);
    const auto ln = io::read_le<std::uint8_t>(in);
    if (act > static_cast<std::uint8_t>(Activation::tanh)) throw io::FormatError("ASNN: unknown activation tag");
    if (rows == 0 || cols == 0 || rows > (1u << 16) || cols > (1u << 16)) throw io::FormatError("ASNN: bad layer shape");
    if (i == 0) input_dim = static_cast<int>(cols);
    DenseLayer<float> l;
    l.weight.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) l.weight(r, c) = io::read_le<float>(in);
    }
    l.bias.resize(rows);
    for (std::uint32_t r = 0; r < rows; ++r) l.bias(r) = io::read_le<float>(in);
    l.layer_norm = ln != 0;
    if (l.layer_norm) {
      l.gain.resize(rows);
      l.offset.resize(rows);
      for (std::uint32_t r = 0; r < rows; ++r) l.gain(r) = io::read_le<float>(in);
      for (std::uint32_t r = 0; r < rows; ++r) l.offset(r) = io::read_le<float>(in);
    }
    l.activation = static_cast<Activation>(act);
    layers.push_back(std::move(l));
  }
  try {
    return MlpF(input_dim, std::move(layers));
  } catch (const ShapeError& e) {
    throw io::FormatError(std::string("ASNN: ") + e.what());
  }
}

void save_mlp(const std::string& path, const MlpF& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write: " + path);
  write_mlp(out, net);
}

MlpF load_mlp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return read_mlp(in);
}

std::string serialize_mlp(const MlpF& net) {
  std::ostringstream out(std::ios::binary);
  write_mlp(out, net);
  return out.str();
}

std::uint64_t mlp_checksum(const MlpF& net) { return fnv1a64(serialize_mlp(net)); }

}  // namespace lsf::nn
