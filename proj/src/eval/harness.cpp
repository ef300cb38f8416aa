#include "lsf/eval/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lsf/common/angles.hpp"
#include "lsf/common/rng.hpp"
#include "lsf/filter/runtime_filter.hpp"

namespace lsf::eval {

std::vector<sim::FailureDisc> sample_constraint_centers(int n, double epsilon, double bound, std::uint64_t seed,
                                                        const grid::GridSpec* snap_to) {
  const double half = bound - epsilon;
  if (!(half >= 0.0)) throw std::invalid_argument("constraint radius exceeds the box");
  Rng rng(seed);
  std::vector<sim::FailureDisc> out;
  for (int i = 0; i < n; ++i) {
    double cx = uniform(rng, -half, half);
    double cy = uniform(rng, -half, half);
    if (snap_to) {
      const double hx = snap_to->dx();
      const double hy = snap_to->dy();
      cx = std::clamp(std::round(cx / hx) * hx, -half, half);
      cy = std::clamp(std::round(cy / hy) * hy, -half, half);
    }
    out.push_back({cx, cy, epsilon});
  }
  return out;
}

ValuePredictor filter_predictor(const hjrl::FilterNets& nets) {
  return [&nets](const nn::MatF& z, const latent::LatentVec& z_c) {
    // Chunked so activations of a full grid do not sit in memory at once.
    constexpr Eigen::Index kChunk = 8192;
    Eigen::VectorXd out(z.cols());
    for (Eigen::Index b = 0; b < z.cols(); b += kChunk) {
      const Eigen::Index n = std::min(kChunk, z.cols() - b);
      out.segment(b, n) = nets.values_latent(z.middleCols(b, n), z_c);
    }
    return out;
  };
}

ClassificationReport eval_classification(const ValuePredictor& predictor, const latent::Encoder& encoder,
                                         std::shared_ptr<const grid::ValueGrid> base, double epsilon,
                                         double threshold, const ClassificationOptions& opt) {
  if (!base) throw std::invalid_argument("eval_classification: null oracle grid");
  const grid::GridSpec& spec = base->spec;
  const std::size_t n_nodes = spec.node_count();
  std::vector<sim::PrivilegedState> nodes(n_nodes);
  for (std::size_t n = 0; n < n_nodes; ++n) nodes[n] = spec.node_state(n);
  const nn::MatF latents = encoder.encode_batch(nodes);
  const double bound = std::min({-spec.x_min, spec.x_max, -spec.y_min, spec.y_max});
  const auto centers = sample_constraint_centers(opt.n_constraints, epsilon, bound, opt.seed,
                                                 opt.snap_centers ? &spec : nullptr);
  const double band = opt.band_cells * std::min(spec.dx(), spec.dy());

  ClassificationReport rep;
  rep.polarity = opt.polarity;
  rep.n_constraints = opt.n_constraints;
  rep.spec = spec;
  rep.threshold = threshold;
  ConfusionCounts unsafe_counts;
  std::size_t oracle_unsafe = 0, counted = 0;
  for (const auto& disc : centers) {
    const grid::ShiftedOracle oracle = grid::oracle_for_constraint(base, disc);
    const Eigen::VectorXd pred = predictor(latents, latent::constraint_latent(encoder, disc.cx, disc.cy));
    for (std::size_t n = 0; n < n_nodes; ++n) {
      const double v = oracle.value(nodes[n]);
      if (band > 0.0 && std::abs(v) < band) continue;
      const bool truth_unsafe = v < 0.0;
      tally(unsafe_counts, truth_unsafe, pred(static_cast<Eigen::Index>(n)) < threshold);
      oracle_unsafe += truth_unsafe ? 1 : 0;
      ++counted;
    }
  }
  rep.counts = opt.polarity == Polarity::unsafe_positive ? unsafe_counts : unsafe_counts.flipped();
  rep.metrics = metrics_from_counts(rep.counts);
  rep.oracle_unsafe_fraction = counted == 0 ? 0.0 : static_cast<double>(oracle_unsafe) / counted;
  return rep;
}

double RolloutReport::fraction_at_least(double d) const {
  if (min_distance.empty()) return 0.0;
  const auto k = std::count_if(min_distance.begin(), min_distance.end(), [d](double m) { return m >= d; });
  return static_cast<double>(k) / static_cast<double>(min_distance.size());
}

RolloutPolicy fallback_policy(const hjrl::FilterNets& nets) {
  return [&nets](const latent::LatentSession& s, const Constraint& c) {
    return nets.fallback_action(s.latent(), c.z_c) * s.params().a_max;
  };
}

RolloutPolicy oracle_policy(std::shared_ptr<const grid::ValueGrid> base, const std::vector<double>& actions) {
  return [base, actions](const latent::LatentSession& s, const Constraint& c) {
    const grid::ShiftedOracle oracle(base, c.disc);
    return grid::oracle_action(oracle, latent::privileged::hidden_state(s), s.params(), actions);
  };
}

namespace {

double center_distance(const sim::PrivilegedState& s, const sim::FailureDisc& d) {
  return std::hypot(s.x - d.cx, s.y - d.cy);
}

struct Start {
  sim::PrivilegedState state;
  Constraint constraint;
};

template <typename Step>
RolloutReport run_rollouts(latent::EncoderPtr encoder, std::shared_ptr<const grid::ValueGrid> base,
                           const sim::DubinsParams& params, const RolloutOptions& opt, Step&& step_fn) {
  if (!base) throw std::invalid_argument("rollouts: null oracle grid");
  Rng rng(opt.seed);
  RolloutReport rep;
  int attempts = 0;
  const double half = params.bound - opt.epsilon;
  while (static_cast<int>(rep.n_rollouts) < opt.n_rollouts) {
    if (++attempts > opt.max_start_attempts) {
      throw std::runtime_error("could not find enough oracle-safe initial states");
    }
    const sim::FailureDisc disc{uniform(rng, -half, half), uniform(rng, -half, half), opt.epsilon};
    const sim::PrivilegedState start{uniform(rng, -params.bound, params.bound),
                                     uniform(rng, -params.bound, params.bound), uniform(rng, -kPi, kPi)};
    const grid::ShiftedOracle oracle = grid::oracle_for_constraint(base, disc);
    if (!(oracle.value(start) > 0.0)) continue;
    const Constraint c{disc, latent::constraint_latent(*encoder, disc.cx, disc.cy)};
    latent::LatentSession session(encoder, params, start);
    if (opt.start_filter && !opt.start_filter(session, c)) continue;

    bool safe = center_distance(start, disc) >= disc.radius;
    double min_d = center_distance(start, disc);
    for (int t = 0; t < params.horizon && session.in_bounds(); ++t) {
      step_fn(session, c, rep);
      const double d = center_distance(latent::privileged::hidden_state(session), disc);
      min_d = std::min(min_d, d);
      if (d < disc.radius) safe = false;
    }
    ++rep.n_rollouts;
    rep.safe_count += safe ? 1 : 0;
    rep.min_distance.push_back(min_d);
  }
  rep.mean_min_distance = rep.min_distance.empty()
                              ? 0.0
                              : std::accumulate(rep.min_distance.begin(), rep.min_distance.end(), 0.0) /
                                    static_cast<double>(rep.min_distance.size());
  return rep;
}

}  // namespace

RolloutReport eval_safe_rate(const RolloutPolicy& policy, latent::EncoderPtr encoder,
                             std::shared_ptr<const grid::ValueGrid> base, const sim::DubinsParams& params,
                             const RolloutOptions& opt) {
  return run_rollouts(encoder, base, params, opt,
                      [&](latent::LatentSession& s, const Constraint& c, RolloutReport&) {
                        const double a = std::clamp(policy(s, c), -params.a_max, params.a_max);
                        s.step(a);
                      });
}

double adversarial_driver(const sim::PrivilegedState& s, const sim::FailureDisc& disc, double a_max) {
  const double bearing = std::atan2(disc.cy - s.y, disc.cx - s.x);
  const double err = wrap_angle(bearing - s.theta);
  // Saturated proportional steering: full rate unless nearly aligned.
  return std::clamp(err / 0.05, -a_max, a_max);
}

RolloutReport eval_filtered_rollouts(const hjrl::FilterNets& nets, const conformal::Threshold& t,
                                     latent::EncoderPtr encoder, std::shared_ptr<const grid::ValueGrid> base,
                                     const sim::DubinsParams& params, const RolloutOptions& opt) {
  return run_rollouts(encoder, base, params, opt,
                      [&](latent::LatentSession& s, const Constraint& c, RolloutReport& rep) {
                        const double task =
                            adversarial_driver(latent::privileged::hidden_state(s), c.disc, params.a_max);
                        const auto d = filter::filtered_step(s, nets, c.z_c, t, task);
                        rep.interventions += d.intervened ? 1 : 0;
                      });
}

}  // namespace lsf::eval
