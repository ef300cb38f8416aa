#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsf/latent/encoder.hpp"
#include "lsf/latent/projector.hpp"
#include "lsf/sim/dataset.hpp"

namespace lsf::conformal {

class InsufficientPositives : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CalibrationPair {
  latent::LatentVec z;
  latent::LatentVec z_prime;
  bool positive = false;
  // Privileged positions, kept for labeling and auditing only.
  sim::Vec2 p;
  sim::Vec2 p_prime;

  double squared_distance() const {
    const double dx = p.x - p_prime.x;
    const double dy = p.y - p_prime.y;
    return dx * dx + dy * dy;
  }
};

inline constexpr double kSentinelDelta = std::numeric_limits<double>::infinity();

struct Threshold {
  double delta = 0.0;
  double alpha = 0.005;
  double epsilon = 0.5;
  std::size_t n_positive = 0;
  double runtime_margin = 0.1;
  std::uint64_t projector_checksum = 0;

  bool is_sentinel() const { return delta == kSentinelDelta; }
  double effective() const { return delta + runtime_margin; }
};

void save_threshold(const std::string& path, const Threshold& t);
Threshold load_threshold(const std::string& path);
std::string threshold_to_text(const Threshold& t);
Threshold threshold_from_text(const std::string& text);

// Draws n_states states uniformly from the (held-out) dataset.
std::vector<sim::PrivilegedState> sample_heldout_states(const sim::Dataset& data, std::size_t n_states,
                                                        std::uint64_t seed);

// Pairs drawn uniformly with replacement from the state pool; y = 1 iff the
// squared distance is below ε². Throws InsufficientPositives when fewer than
// min_positive pairs are positive.
std::vector<CalibrationPair> build_calibration_set(const std::vector<sim::PrivilegedState>& pool,
                                                   const latent::Encoder& encoder, std::size_t n_pairs,
                                                   double epsilon, std::uint64_t seed,
                                                   std::size_t min_positive = 50);

// Same pairs, labels recomputed for another ε.
std::vector<CalibrationPair> relabel(std::vector<CalibrationPair> pairs, double epsilon);

// Nonconformity score of a pair: -sim under some similarity.
using PairScorer = std::function<double(const CalibrationPair&)>;

PairScorer ideal_scorer();
PairScorer projector_scorer(const latent::FailureProjector& proj);
PairScorer raw_latent_scorer();
PairScorer scorer_for(latent::MarginKind kind, const latent::FailureProjector* proj);

// k = ceil((1 - α)(N + 1)), 1-based.
std::size_t quantile_index(std::size_t n, double alpha);

// δ from ascending positive scores; +inf (with a warning) when k > N.
double quantile_threshold(const std::vector<double>& sorted_scores, double alpha);

// Ascending scores of the positive pairs only.
std::vector<double> positive_scores(const std::vector<CalibrationPair>& pairs, const PairScorer& scorer);

Threshold calibrate(const std::vector<CalibrationPair>& pairs, const PairScorer& scorer, double alpha,
                    double epsilon, std::uint64_t projector_checksum = 0, double runtime_margin = 0.1);

struct RecallReport {
  std::size_t n_positive = 0;
  std::size_t covered = 0;
  double recall = 1.0;
  double ci_low = 0.0;   // Wilson 95% interval
  double ci_high = 1.0;
  bool in_sample = false;
};

// Empirical P(score <= δ | y = 1).
RecallReport audit_recall(const std::vector<CalibrationPair>& pairs, const PairScorer& scorer, const Threshold& t,
                          bool in_sample);

void wilson_interval(std::size_t successes, std::size_t trials, double z, double& low, double& high);

// Sorted positive scores per ε, so α and ε can be changed at runtime without
// touching the pairs again.
class CalibrationCache {
 public:
  CalibrationCache() = default;

  void add(double epsilon, std::vector<double> sorted_scores);
  bool has(double epsilon) const;
  std::vector<double> epsilons() const;
  const std::vector<double>& scores(double epsilon) const;
  Threshold threshold(double epsilon, double alpha, double runtime_margin = 0.1) const;

  std::uint64_t projector_checksum = 0;
  latent::MarginKind margin_kind = latent::MarginKind::projected;

  void save(const std::string& path) const;
  static CalibrationCache load(const std::string& path);

 private:
  std::map<long long, std::vector<double>> by_epsilon_;  // key: ε in micrometers
};

}  // namespace lsf::conformal
