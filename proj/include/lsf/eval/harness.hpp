#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "lsf/conformal/calibration.hpp"
#include "lsf/eval/metrics.hpp"
#include "lsf/grid/oracle.hpp"
#include "lsf/hjrl/filter_nets.hpp"
#include "lsf/latent/session.hpp"

namespace lsf::eval {

struct ClassificationOptions {
  int n_constraints = 50;
  std::uint64_t seed = 11;
  Polarity polarity = Polarity::unsafe_positive;
  // Nodes whose oracle value lies within band_cells grid cells of zero are
  // left out of the counts.
  double band_cells = 0.0;
  // Snap sampled centers to the grid lattice so shifted oracle lookups land
  // on nodes.
  bool snap_centers = true;
};

struct ClassificationReport {
  ConfusionCounts counts;  // under `polarity`
  Metrics metrics;
  Polarity polarity = Polarity::unsafe_positive;
  int n_constraints = 0;
  grid::GridSpec spec;
  double threshold = 0.0;
  double oracle_unsafe_fraction = 0.0;

  // Metrics of the same predictions with the other class as positive.
  Metrics other_polarity() const { return metrics_from_counts(counts.flipped()); }
};

// Constraint centers uniform over the box shrunk by ε.
std::vector<sim::FailureDisc> sample_constraint_centers(int n, double epsilon, double bound, std::uint64_t seed,
                                                        const grid::GridSpec* snap_to);

// Predicted values for all node latents (columns) against one constraint.
using ValuePredictor = std::function<Eigen::VectorXd(const nn::MatF& node_latents, const latent::LatentVec& z_c)>;

ValuePredictor filter_predictor(const hjrl::FilterNets& nets);

// Oracle label: unsafe iff shifted oracle value < 0. Prediction: unsafe iff
// predicted value < threshold. Throws grid::EpsilonMismatch if the base grid
// radius differs from `epsilon`.
ClassificationReport eval_classification(const ValuePredictor& predictor, const latent::Encoder& encoder,
                                         std::shared_ptr<const grid::ValueGrid> base, double epsilon,
                                         double threshold, const ClassificationOptions& opt);

struct RolloutReport {
  std::size_t n_rollouts = 0;
  std::size_t safe_count = 0;
  std::vector<double> min_distance;  // to the constraint center, per rollout
  double mean_min_distance = 0.0;
  std::size_t interventions = 0;     // filtered rollouts only

  double safe_rate() const { return n_rollouts == 0 ? 0.0 : static_cast<double>(safe_count) / n_rollouts; }
  // Fraction of rollouts whose min distance is at least `d`.
  double fraction_at_least(double d) const;
};

struct Constraint {
  sim::FailureDisc disc;
  latent::LatentVec z_c;
};

// Returns an angular velocity in [-a_max, a_max]. The evaluation harness is
// privileged, so oracle policies may read the hidden state.
using RolloutPolicy = std::function<double(const latent::LatentSession&, const Constraint&)>;

RolloutPolicy fallback_policy(const hjrl::FilterNets& nets);
RolloutPolicy oracle_policy(std::shared_ptr<const grid::ValueGrid> base, const std::vector<double>& actions);

struct RolloutOptions {
  int n_rollouts = 250;
  std::uint64_t seed = 23;
  double epsilon = 0.5;
  int max_start_attempts = 1000000;
  // Extra acceptance test on sampled starts (e.g. learned value > δ).
  std::function<bool(const latent::LatentSession&, const Constraint&)> start_filter;
};

// Starts where the shifted oracle value is > 0; rolls `policy` for the
// horizon or until the vehicle leaves the box. Safe iff no visited state is
// inside the disc.
RolloutReport eval_safe_rate(const RolloutPolicy& policy, latent::EncoderPtr encoder,
                             std::shared_ptr<const grid::ValueGrid> base, const sim::DubinsParams& params,
                             const RolloutOptions& opt);

// Straight-line driver that turns toward the constraint center at full rate.
double adversarial_driver(const sim::PrivilegedState& s, const sim::FailureDisc& disc, double a_max);

// Adversarial task policy filtered at threshold t.
RolloutReport eval_filtered_rollouts(const hjrl::FilterNets& nets, const conformal::Threshold& t,
                                     latent::EncoderPtr encoder, std::shared_ptr<const grid::ValueGrid> base,
                                     const sim::DubinsParams& params, const RolloutOptions& opt);

}  // namespace lsf::eval
