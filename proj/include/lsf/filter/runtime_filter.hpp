#pragma once

#include <functional>
#include <stdexcept>

#include "lsf/conformal/calibration.hpp"
#include "lsf/hjrl/filter_nets.hpp"
#include "lsf/latent/session.hpp"

namespace lsf::filter {

struct FilterDecision {
  double executed_action = 0.0;  // rad/s
  double task_action = 0.0;      // rad/s
  bool intervened = false;
  double monitored_value = 0.0;  // V(f(z, a_task); z_c)
  double threshold_used = 0.0;   // δ + runtime margin
  int constraint_id = 0;
};

class ProvenanceMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything the switching law reads. Exposed so callers can audit that only
// latents reach the filter.
struct FilterInputs {
  const latent::LatentVec* current = nullptr;
  const latent::LatentVec* lookahead = nullptr;
  const latent::LatentVec* constraint = nullptr;
};
using FilterInputHook = std::function<void(const FilterInputs&)>;

// Throws ProvenanceMismatch when nets and threshold were produced with
// different projectors.
void check_provenance(const hjrl::FilterNets& nets, const conformal::Threshold& t);

// Peeks one step under a_task on a branch, passes a_task through iff the
// value there exceeds δ + runtime margin, otherwise returns the fallback.
// Does not advance the session.
FilterDecision filter_action(const latent::LatentSession& session, const hjrl::FilterNets& nets,
                             const latent::LatentVec& z_c, const conformal::Threshold& t, double a_task,
                             int constraint_id = 0, const FilterInputHook* hook = nullptr);

// filter_action followed by executing the decided action on the session.
FilterDecision filtered_step(latent::LatentSession& session, const hjrl::FilterNets& nets,
                             const latent::LatentVec& z_c, const conformal::Threshold& t, double a_task,
                             int constraint_id = 0, const FilterInputHook* hook = nullptr);

// V(z; z_c) at the session's current latent.
double monitor(const latent::LatentSession& session, const hjrl::FilterNets& nets, const latent::LatentVec& z_c);

}  // namespace lsf::filter
