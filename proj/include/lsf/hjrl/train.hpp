#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "lsf/hjrl/filter_nets.hpp"
#include "lsf/latent/encoder.hpp"
#include "lsf/sim/dataset.hpp"

namespace lsf::hjrl {

// y = (1 - γ) ℓ + γ min(ℓ, q_next)
inline double critic_target(double margin, double gamma, double q_next) {
  return (1.0 - gamma) * margin + gamma * std::min(margin, q_next);
}

// Fixed-capacity ring buffer of transitions stored in the strategy's input
// space, so sampling needs no re-projection.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int state_dim, int condition_dim);

  void add(const nn::VecF& s, const nn::VecF& c, float action, float margin, const nn::VecF& s_next);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }

  struct Batch {
    nn::MatF s, c, s_next;
    nn::MatF action;  // 1 x B
    Eigen::VectorXd margin;
  };
  Batch sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;
  nn::MatF s_, c_, s_next_;
  Eigen::VectorXf action_, margin_;
};

struct FilterTrainConfig {
  Conditioning conditioning = Conditioning::zz;
  latent::MarginKind margin = latent::MarginKind::projected;
  std::vector<int> hidden = {128, 128, 128};
  long long steps = 30000;  // gradient updates after warmup
  std::size_t warmup = 5000;
  std::size_t batch = 128;
  std::size_t replay_capacity = 200000;
  int max_imagination_steps = 30;
  double gamma_start = 0.85;
  double gamma_end = 0.9999;
  double gamma_anneal_fraction = 0.8;
  double critic_lr = 1e-3;
  double actor_lr = 1e-4;
  double weight_decay = 1e-4;
  double tau = 0.005;
  double exploration_sigma = 0.2;
  int prototypes = 9;
  std::size_t prototype_points = 20000;
  bool average_constraint_headings = false;
  int log_every = 1000;
  std::uint64_t seed = 1;
};

struct FilterTrainResult {
  FilterNets nets;
  std::vector<double> critic_loss;  // mean over each log window
  std::vector<double> actor_loss;
  std::vector<double> gamma;        // γ at the end of each log window
  double seconds = 0.0;
};

using TrainProgress = std::function<void(long long step, double critic_loss, double actor_loss, double gamma)>;

// Deterministic for a fixed config, dataset and projector. Throws
// std::invalid_argument when a projector is needed but missing, or when the
// warmup cannot fill a batch.
FilterTrainResult train_filter(const FilterTrainConfig& cfg, const sim::Dataset& data, latent::EncoderPtr encoder,
                               std::shared_ptr<const latent::FailureProjector> projector,
                               const TrainProgress& progress = {});

// Constraint latents encode((x, y, 0)) of dataset positions, used to fit the
// zp prototypes.
nn::MatF constraint_latents_from_dataset(const sim::Dataset& data, const latent::Encoder& encoder, std::size_t count,
                                         std::uint64_t seed);

}  // namespace lsf::hjrl
