#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "lsf/hjrl/prototypes.hpp"
#include "lsf/latent/projector.hpp"
#include "lsf/nn/mlp.hpp"

namespace lsf::hjrl {

// Which representation feeds the value function.
//   zz:   state z,        condition z_c
//   zp:   state z,        condition nearest prototype of z_c
//   zzt:  state z,        condition project(z_c)
//   ztzt: state project(z), condition project(z_c)
enum class Conditioning : std::uint8_t { zz = 0, zp = 1, zzt = 2, ztzt = 3 };

const char* conditioning_name(Conditioning c);
Conditioning parse_conditioning(const std::string& name);
bool conditioning_uses_projector(Conditioning c);

struct GammaSchedule {
  double start = 0.85;
  double end = 0.9999;
  double anneal_fraction = 0.8;
  long long total_steps = 1;

  // Linear from start to end over the first anneal_fraction of the steps.
  double at(long long step) const;
};

class ConditioningMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Critic Q(s, c, a) and actor π(s, c) with their target copies. Inputs are
// in the strategy's own space; the *_latent helpers map raw latents there.
struct FilterNets {
  Conditioning conditioning = Conditioning::zz;
  latent::MarginKind margin_kind = latent::MarginKind::projected;
  int latent_dim = 16;
  nn::MlpF critic;
  nn::MlpF actor;
  nn::MlpF critic_target;
  nn::MlpF actor_target;
  GammaSchedule gamma;
  long long steps_trained = 0;
  std::uint64_t projector_checksum = 0;
  PrototypeSet prototypes;
  std::shared_ptr<const latent::FailureProjector> projector;

  static FilterNets make(Conditioning conditioning, latent::MarginKind margin, int latent_dim,
                         const std::vector<int>& hidden, std::shared_ptr<const latent::FailureProjector> projector,
                         std::uint64_t seed);

  int state_dim() const;
  int condition_dim() const;

  // Raw latents (columns) -> strategy inputs.
  nn::MatF state_inputs(const nn::MatF& z) const;
  nn::MatF condition_inputs(const nn::MatF& z_c) const;
  nn::VecF condition_input(const latent::LatentVec& z_c) const;

  // Batched evaluation on strategy inputs. Throws ConditioningMismatch when
  // the row counts do not fit the strategy.
  nn::MatF actions(const nn::MatF& s, const nn::MatF& c) const;
  Eigen::VectorXd values(const nn::MatF& s, const nn::MatF& c) const;

  // V(z; z_c) = Q(z, π(z; z_c); z_c) for raw latents.
  double value(const latent::LatentVec& z, const latent::LatentVec& z_c) const;
  // Normalized action in [-1, 1].
  double fallback_action(const latent::LatentVec& z, const latent::LatentVec& z_c) const;
  // Values of many raw latent columns against one raw constraint latent.
  Eigen::VectorXd values_latent(const nn::MatF& z, const latent::LatentVec& z_c) const;
  Eigen::VectorXd fallback_actions_latent(const nn::MatF& z, const latent::LatentVec& z_c) const;

  // Requires a projector whose checksum matches the one recorded at training
  // time for strategies that project. Throws std::invalid_argument otherwise.
  void attach_projector(std::shared_ptr<const latent::FailureProjector> proj);
};

// ASFN container: header, optional prototypes, critic and actor networks.
void save_filter(const std::string& path, const FilterNets& nets);
FilterNets load_filter(const std::string& path, std::shared_ptr<const latent::FailureProjector> projector);

}  // namespace lsf::hjrl
