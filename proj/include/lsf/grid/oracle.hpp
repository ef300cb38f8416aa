#pragma once

#include <memory>
#include <stdexcept>

#include "lsf/grid/bellman.hpp"

namespace lsf::grid {

class EpsilonMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Value function for a disc centered anywhere, read off a base grid solved
// for the disc at the origin: V_c(s) = V_0(s - (cx, cy, 0)).
class ShiftedOracle {
 public:
  ShiftedOracle(std::shared_ptr<const ValueGrid> base, const sim::FailureDisc& disc);
  double value(const sim::PrivilegedState& s) const;
  const sim::FailureDisc& disc() const { return disc_; }
  const ValueGrid& base() const { return *base_; }

 private:
  std::shared_ptr<const ValueGrid> base_;
  sim::FailureDisc disc_;
};

// Throws EpsilonMismatch if the base grid carries a different radius or is
// not centered at the origin.
ShiftedOracle oracle_for_constraint(std::shared_ptr<const ValueGrid> base, const sim::FailureDisc& disc);

// Greedy action of the oracle: argmax over the discrete action set of the
// interpolated value at the one-step successor.
double oracle_action(const ShiftedOracle& oracle, const sim::PrivilegedState& s, const sim::DubinsParams& params,
                     const std::vector<double>& actions);

struct Theorem1Report {
  double delta = 0.0;
  int iterations = 0;
  double max_abs_diff = 0.0;           // max |V_δ - (V - δ)|
  std::size_t symmetric_difference = 0;  // |{V_δ < 0} △ {V < δ}|, all nodes
  std::size_t symmetric_difference_off_band = 0;
  double band = 0.0;                   // nodes with |V - δ| <= band are excluded above
  bool base_converged = false;
};

// Solves with ℓ to convergence, then with ℓ - δ for exactly the same number
// of sweeps from the shifted initialization.
Theorem1Report verify_theorem1(const TransitionModel& model, const std::vector<double>& margin, double delta,
                               const IterationOptions& opt, double band = 1e-9);

}  // namespace lsf::grid
