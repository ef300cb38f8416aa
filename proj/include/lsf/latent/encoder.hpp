#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <span>

#include "lsf/nn/mlp.hpp"
#include "lsf/sim/dubins.hpp"

namespace lsf::latent {

using LatentVec = nn::VecF;

inline constexpr int kDefaultLatentDim = 16;
inline constexpr std::uint64_t kDefaultEncoderSeed = 20251017;

// Fixed, non-trainable surrogate for a world-model encoder:
//   z = tanh(W2 tanh(W1 psi(s))),  psi(s) = [x/b, y/b, cos theta, sin theta]
// with x/b and y/b clamped to [-1, 1]. W1 has full column rank and W2 is
// invertible, so the map is injective on the state box.
class Encoder {
 public:
  explicit Encoder(std::uint64_t seed = kDefaultEncoderSeed, int latent_dim = kDefaultLatentDim, double bound = 1.5,
                   double weight_scale = 0.5);

  LatentVec encode(const sim::PrivilegedState& s) const;
  nn::MatF encode_batch(std::span<const sim::PrivilegedState> states) const;

  int latent_dim() const { return latent_dim_; }
  std::uint64_t seed() const { return seed_; }
  double bound() const { return bound_; }
  const Eigen::MatrixXd& first_weights() const { return w1_; }
  const Eigen::MatrixXd& second_weights() const { return w2_; }

 private:
  Eigen::Vector4d features(const sim::PrivilegedState& s) const;

  std::uint64_t seed_;
  int latent_dim_;
  double bound_;
  Eigen::MatrixXd w1_;  // latent_dim x 4
  Eigen::MatrixXd w2_;  // latent_dim x latent_dim
};

using EncoderPtr = std::shared_ptr<const Encoder>;

}  // namespace lsf::latent
