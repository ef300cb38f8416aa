#include "lsf/filter/runtime_filter.hpp"

#include <cmath>

#include "lsf/common/log.hpp"

namespace lsf::filter {

void check_provenance(const hjrl::FilterNets& nets, const conformal::Threshold& t) {
  if (nets.projector_checksum != t.projector_checksum) {
    throw ProvenanceMismatch("filter networks and threshold were calibrated with different projectors");
  }
}

FilterDecision filter_action(const latent::LatentSession& session, const hjrl::FilterNets& nets,
                             const latent::LatentVec& z_c, const conformal::Threshold& t, double a_task,
                             int constraint_id, const FilterInputHook* hook) {
  const double a_max = session.params().a_max;
  if (!(std::abs(a_task) <= a_max * (1.0 + 1e-12))) {
    throw std::invalid_argument("task action outside [-a_max, a_max]");
  }
  check_provenance(nets, t);
  FilterDecision d;
  d.task_action = a_task;
  d.constraint_id = constraint_id;
  d.threshold_used = t.effective();
  const latent::LatentVec& z = session.latent();
  const latent::LatentVec z_next = session.branch().peek(a_task);
  if (hook && *hook) (*hook)({&z, &z_next, &z_c});
  d.monitored_value = nets.value(z_next, z_c);
  if (t.is_sentinel()) {
    warn("threshold is the +inf sentinel; the filter always uses the fallback policy");
  }
  d.intervened = !(d.monitored_value > d.threshold_used);
  d.executed_action = d.intervened ? nets.fallback_action(z, z_c) * a_max : a_task;
  return d;
}

FilterDecision filtered_step(latent::LatentSession& session, const hjrl::FilterNets& nets,
                             const latent::LatentVec& z_c, const conformal::Threshold& t, double a_task,
                             int constraint_id, const FilterInputHook* hook) {
  const FilterDecision d = filter_action(session, nets, z_c, t, a_task, constraint_id, hook);
  session.step(d.executed_action);
  return d;
}

double monitor(const latent::LatentSession& session, const hjrl::FilterNets& nets, const latent::LatentVec& z_c) {
  return nets.value(session.latent(), z_c);
}

}  // namespace lsf::filter
