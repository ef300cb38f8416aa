#include "lsf/grid/oracle.hpp"

#include <cmath>
#include <limits>

namespace lsf::grid {

ShiftedOracle::ShiftedOracle(std::shared_ptr<const ValueGrid> base, const sim::FailureDisc& disc)
    : base_(std::move(base)), disc_(disc) {
  if (!base_) throw std::invalid_argument("ShiftedOracle: null base grid");
}

double ShiftedOracle::value(const sim::PrivilegedState& s) const {
  return value_at(*base_, {s.x - disc_.cx, s.y - disc_.cy, s.theta});
}

ShiftedOracle oracle_for_constraint(std::shared_ptr<const ValueGrid> base, const sim::FailureDisc& disc) {
  if (!base) throw std::invalid_argument("oracle_for_constraint: null base grid");
  if (base->margin) {
    const auto& m = *base->margin;
    // Radii round-trip through f32 on disk.
    if (std::abs(m.epsilon - disc.radius) > 1e-6) {
      throw EpsilonMismatch("oracle_for_constraint: base grid solved for epsilon " + std::to_string(m.epsilon) +
                            ", requested " + std::to_string(disc.radius));
    }
    if (std::abs(m.cx) > 1e-9 || std::abs(m.cy) > 1e-9) {
      throw std::invalid_argument("oracle_for_constraint: base grid must be solved at the origin");
    }
  }
  return ShiftedOracle(std::move(base), disc);
}

double oracle_action(const ShiftedOracle& oracle, const sim::PrivilegedState& s, const sim::DubinsParams& params,
                     const std::vector<double>& actions) {
  double best_a = 0.0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (double a : actions) {
    const double v = oracle.value(sim::step(s, a, params));
    if (v > best_v) {
      best_v = v;
      best_a = a;
    }
  }
  return best_a;
}

Theorem1Report verify_theorem1(const TransitionModel& model, const std::vector<double>& margin, double delta,
                               const IterationOptions& opt, double band) {
  Theorem1Report rep;
  rep.delta = delta;
  rep.band = band;
  const IterationResult base = value_iteration(model, margin, opt);
  rep.iterations = base.iterations;
  rep.base_converged = base.converged;
  std::vector<double> shifted_margin(margin.size());
  for (std::size_t n = 0; n < margin.size(); ++n) shifted_margin[n] = margin[n] - delta;
  IterationOptions fixed = opt;
  fixed.fixed_iterations = base.iterations;
  const IterationResult shifted = value_iteration(model, shifted_margin, fixed);
  for (std::size_t n = 0; n < margin.size(); ++n) {
    const double v = base.values[n];
    const double vd = shifted.values[n];
    rep.max_abs_diff = std::max(rep.max_abs_diff, std::abs(vd - (v - delta)));
    if ((vd < 0.0) != (v < delta)) {
      ++rep.symmetric_difference;
      if (std::abs(v - delta) > band) ++rep.symmetric_difference_off_band;
    }
  }
  return rep;
}

}  // namespace lsf::grid
