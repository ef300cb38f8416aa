#include "lsf/hjrl/filter_nets.hpp"

#include <algorithm>
#include <fstream>

#include "lsf/common/binary_io.hpp"
#include "lsf/nn/checkpoint.hpp"

namespace lsf::hjrl {

const char* conditioning_name(Conditioning c) {
  switch (c) {
    case Conditioning::zz: return "zz";
    case Conditioning::zp: return "zp";
    case Conditioning::zzt: return "zzt";
    case Conditioning::ztzt: return "ztzt";
  }
  return "?";
}

Conditioning parse_conditioning(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (s == "zz") return Conditioning::zz;
  if (s == "zp") return Conditioning::zp;
  if (s == "zzt") return Conditioning::zzt;
  if (s == "ztzt") return Conditioning::ztzt;
  throw std::invalid_argument("unknown conditioning strategy: " + name);
}

bool conditioning_uses_projector(Conditioning c) { return c == Conditioning::zzt || c == Conditioning::ztzt; }

double GammaSchedule::at(long long step) const {
  const double span = anneal_fraction * static_cast<double>(std::max<long long>(total_steps, 1));
  const double f = span <= 0.0 ? 1.0 : std::clamp(static_cast<double>(step) / span, 0.0, 1.0);
  return start + (end - start) * f;
}

namespace {

nn::MlpF make_net(int input_dim, const std::vector<int>& hidden, bool tanh_head, Rng& rng) {
  std::vector<nn::LayerSpec> specs;
  for (int h : hidden) specs.push_back({h, true, nn::Activation::relu});
  specs.push_back({1, false, tanh_head ? nn::Activation::tanh : nn::Activation::identity});
  return nn::MlpF::make(input_dim, specs, rng);
}

}  // namespace

FilterNets FilterNets::make(Conditioning conditioning, latent::MarginKind margin, int latent_dim,
                            const std::vector<int>& hidden, std::shared_ptr<const latent::FailureProjector> projector,
                            std::uint64_t seed) {
  FilterNets f;
  f.conditioning = conditioning;
  f.margin_kind = margin;
  f.latent_dim = latent_dim;
  if (conditioning_uses_projector(conditioning) && !projector) {
    throw std::invalid_argument(std::string("conditioning ") + conditioning_name(conditioning) + " needs a projector");
  }
  f.projector = std::move(projector);
  if (f.projector) f.projector_checksum = f.projector->checksum();
  Rng rng(seed);
  const int s = f.state_dim();
  const int c = f.condition_dim();
  f.critic = make_net(s + c + 1, hidden, false, rng);
  f.actor = make_net(s + c, hidden, true, rng);
  f.critic_target = f.critic;
  f.actor_target = f.actor;
  return f;
}

int FilterNets::state_dim() const { return conditioning == Conditioning::ztzt ? latent::kProjectedDim : latent_dim; }

int FilterNets::condition_dim() const { return conditioning_uses_projector(conditioning) ? latent::kProjectedDim : latent_dim; }

nn::MatF FilterNets::state_inputs(const nn::MatF& z) const {
  if (z.rows() != latent_dim) throw ConditioningMismatch("state latent has wrong dimension");
  if (conditioning == Conditioning::ztzt) return projector->project_batch(z);
  return z;
}

nn::MatF FilterNets::condition_inputs(const nn::MatF& z_c) const {
  if (z_c.rows() != latent_dim) throw ConditioningMismatch("constraint latent has wrong dimension");
  switch (conditioning) {
    case Conditioning::zz: return z_c;
    case Conditioning::zzt:
    case Conditioning::ztzt: return projector->project_batch(z_c);
    case Conditioning::zp: {
      if (prototypes.empty()) throw ConditioningMismatch("zp conditioning without prototypes");
      nn::MatF out(z_c.rows(), z_c.cols());
      for (Eigen::Index i = 0; i < z_c.cols(); ++i) out.col(i) = prototypes.nearest(z_c.col(i));
      return out;
    }
  }
  return z_c;
}

nn::VecF FilterNets::condition_input(const latent::LatentVec& z_c) const {
  return condition_inputs(nn::MatF(z_c)).col(0);
}

nn::MatF FilterNets::actions(const nn::MatF& s, const nn::MatF& c) const {
  if (s.rows() != state_dim() || c.rows() != condition_dim() || s.cols() != c.cols()) {
    throw ConditioningMismatch(std::string("input dimensions do not match conditioning ") + conditioning_name(conditioning));
  }
  nn::MatF x(s.rows() + c.rows(), s.cols());
  x.topRows(s.rows()) = s;
  x.bottomRows(c.rows()) = c;
  return actor.forward(x);
}

Eigen::VectorXd FilterNets::values(const nn::MatF& s, const nn::MatF& c) const {
  const nn::MatF a = actions(s, c);
  nn::MatF x(s.rows() + c.rows() + 1, s.cols());
  x.topRows(s.rows()) = s;
  x.middleRows(s.rows(), c.rows()) = c;
  x.bottomRows(1) = a;
  return critic.forward(x).row(0).transpose().cast<double>();
}

double FilterNets::value(const latent::LatentVec& z, const latent::LatentVec& z_c) const {
  return values(state_inputs(nn::MatF(z)), nn::MatF(condition_input(z_c)))(0);
}

double FilterNets::fallback_action(const latent::LatentVec& z, const latent::LatentVec& z_c) const {
  return static_cast<double>(actions(state_inputs(nn::MatF(z)), nn::MatF(condition_input(z_c)))(0, 0));
}

Eigen::VectorXd FilterNets::values_latent(const nn::MatF& z, const latent::LatentVec& z_c) const {
  const nn::VecF c = condition_input(z_c);
  return values(state_inputs(z), c.replicate(1, z.cols()));
}

Eigen::VectorXd FilterNets::fallback_actions_latent(const nn::MatF& z, const latent::LatentVec& z_c) const {
  const nn::VecF c = condition_input(z_c);
  return actions(state_inputs(z), c.replicate(1, z.cols())).row(0).transpose().cast<double>();
}

void FilterNets::attach_projector(std::shared_ptr<const latent::FailureProjector> proj) {
  if (proj && projector_checksum != 0 && proj->checksum() != projector_checksum) {
    throw std::invalid_argument("projector checksum does not match the one the filter was trained with");
  }
  if (!proj && conditioning_uses_projector(conditioning)) {
    throw std::invalid_argument(std::string("conditioning ") + conditioning_name(conditioning) + " needs a projector");
  }
  projector = std::move(proj);
}

namespace {
constexpr const char* kMagic = "ASFN";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_filter(const std::string& path, const FilterNets& nets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  io::write_magic(out, kMagic);
  io::write_le<std::uint32_t>(out, kVersion);
  io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(nets.conditioning));
  io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(nets.margin_kind));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(nets.latent_dim));
  io::write_le<double>(out, nets.gamma.start);
  io::write_le<double>(out, nets.gamma.end);
  io::write_le<double>(out, nets.gamma.anneal_fraction);
  io::write_le<std::int64_t>(out, nets.gamma.total_steps);
  io::write_le<std::int64_t>(out, nets.steps_trained);
  io::write_le<std::uint64_t>(out, nets.projector_checksum);
  const auto& c = nets.prototypes.centers;
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.cols()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.rows()));
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    for (Eigen::Index i = 0; i < c.rows(); ++i) io::write_le<float>(out, c(i, j));
  }
  nn::write_mlp(out, nets.critic);
  nn::write_mlp(out, nets.actor);
  if (!out) throw std::runtime_error("write failed: " + path);
}

FilterNets load_filter(const std::string& path, std::shared_ptr<const latent::FailureProjector> projector) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  io::expect_magic(in, kMagic);
  if (io::read_le<std::uint32_t>(in) != kVersion) throw io::FormatError("ASFN: unsupported version");
  FilterNets f;
  const auto cond = io::read_le<std::uint8_t>(in);
  if (cond > 3) throw io::FormatError("ASFN: bad conditioning tag");
  f.conditioning = static_cast<Conditioning>(cond);
  const auto margin = io::read_le<std::uint8_t>(in);
  if (margin > 1) throw io::FormatError("ASFN: bad margin tag");
  f.margin_kind = static_cast<latent::MarginKind>(margin);
  f.latent_dim = static_cast<int>(io::read_le<std::uint32_t>(in));
  f.gamma.start = io::read_le<double>(in);
  f.gamma.end = io::read_le<double>(in);
  f.gamma.anneal_fraction = io::read_le<double>(in);
  f.gamma.total_steps = io::read_le<std::int64_t>(in);
  f.steps_trained = io::read_le<std::int64_t>(in);
  f.projector_checksum = io::read_le<std::uint64_t>(in);
  const auto k = io::read_le<std::uint32_t>(in);
  const auto rows = io::read_le<std::uint32_t>(in);
  if (k > 4096 || rows > 4096) throw io::FormatError("ASFN: implausible prototype shape");
  f.prototypes.centers.resize(rows, k);
  for (std::uint32_t j = 0; j < k; ++j) {
    for (std::uint32_t i = 0; i < rows; ++i) f.prototypes.centers(i, j) = io::read_le<float>(in);
  }
  f.critic = nn::read_mlp(in);
  f.actor = nn::read_mlp(in);
  f.critic_target = f.critic;
  f.actor_target = f.actor;
  f.attach_projector(std::move(projector));
  const int s = f.state_dim();
  const int c = f.condition_dim();
  if (f.critic.input_dim() != s + c + 1 || f.actor.input_dim() != s + c || f.critic.output_dim() != 1 ||
      f.actor.output_dim() != 1) {
    throw io::FormatError("ASFN: network shapes do not match the conditioning strategy");
  }
  return f;
}

}  // namespace lsf::hjrl
