#pragma once

#include <cstdint>
#include <vector>

#include "lsf/latent/encoder.hpp"
#include "lsf/nn/mlp.hpp"
#include "lsf/sim/dataset.hpp"

namespace lsf::latent {

using ProjectedVec = nn::VecF;

inline constexpr int kProjectedDim = 32;

// Two-layer failure projector: d_z -> d_z (LayerNorm, SiLU) -> 32 (LayerNorm).
class FailureProjector {
 public:
  FailureProjector() = default;
  explicit FailureProjector(nn::MlpF net);

  static FailureProjector make(int latent_dim, std::uint64_t seed);

  ProjectedVec project(const LatentVec& z) const;
  nn::MatF project_batch(const nn::MatF& z) const;

  const nn::MlpF& net() const { return net_; }
  nn::MlpF& mutable_net() { return net_; }
  int latent_dim() const { return net_.input_dim(); }
  std::uint64_t checksum() const;

 private:
  nn::MlpF net_;
};

enum class MarginKind : std::uint8_t {
  projected = 0,  // -cos(project(z), project(z_c))
  raw = 1,        // -cos(z, z_c), the no-projector ablation
};

const char* margin_kind_name(MarginKind kind);
MarginKind parse_margin_kind(const std::string& name);

// -cos(project(z), project(z_c)). Throws nn::DegenerateNormError when either
// projected norm is <= 1e-8.
double latent_margin(const FailureProjector& proj, const LatentVec& z, const LatentVec& z_c);
double raw_latent_margin(const LatentVec& z, const LatentVec& z_c);

// Column-wise margins of z against already-transformed constraint columns:
// for MarginKind::projected, cond holds projected constraint vectors.
Eigen::VectorXd margin_columns(MarginKind kind, const FailureProjector* proj, const nn::MatF& z, const nn::MatF& cond);

// A constraint at position (x, y) is the encoding of (x, y, 0).
LatentVec constraint_latent(const Encoder& encoder, double x, double y);

// Projected constraint embedding; with average_headings, the mean of the
// projections of (x, y, θ) over 8 evenly spaced headings.
ProjectedVec constraint_projection(const FailureProjector& proj, const Encoder& encoder, double x, double y,
                                   bool average_headings);

struct StatePair {
  sim::PrivilegedState first;
  sim::PrivilegedState second;
};

// Both members drawn independently and uniformly over stored (trajectory,
// timestep) entries.
std::vector<StatePair> sample_state_pairs(const sim::StateIndex& index, std::size_t count, Rng& rng);

struct ProjectorTrainConfig {
  std::size_t pair_count = 200000;
  std::size_t heldout_pairs = 20000;
  int epochs = 100;
  int batch_size = 256;
  double learning_rate = 3e-3;  // cosine-annealed to 0 over training
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;
};

struct ProjectorTrainResult {
  FailureProjector projector;
  double train_mse = 0.0;
  double heldout_mse = 0.0;
  std::vector<double> epoch_losses;
};

// Minimizes (sim(project(z1), project(z2)) - s)^2 with s the ground-truth
// position similarity. Throws on an empty dataset.
ProjectorTrainResult train_projector(const sim::Dataset& data, const Encoder& encoder,
                                     const ProjectorTrainConfig& cfg);

double projector_mse(const FailureProjector& proj, const Encoder& encoder, const std::vector<StatePair>& pairs);

// Fraction of probes (random x, y, two random headings, random constraint)
// whose similarity to the constraint changes by at most tolerance.
double heading_invariance_fraction(const FailureProjector& proj, const Encoder& encoder, std::size_t probes,
                                   double tolerance, std::uint64_t seed);

}  // namespace lsf::latent
