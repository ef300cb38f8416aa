#pragma once

#include "lsf/latent/encoder.hpp"
#include "lsf/sim/dubins.hpp"

namespace lsf::latent {

class LatentSession;

namespace privileged {
// Evaluation-harness and test hook. Filtering code must not call this.
sim::PrivilegedState hidden_state(const LatentSession& session);
}  // namespace privileged

// Oracle latent dynamics: a hidden Dubins state advanced by the true
// simulator, observable only through its encoding.
class LatentSession {
 public:
  LatentSession(EncoderPtr encoder, sim::DubinsParams params, const sim::PrivilegedState& start);

  const LatentVec& latent() const { return latent_; }
  const sim::DubinsParams& params() const { return params_; }
  const Encoder& encoder() const { return *encoder_; }

  // Applies angular velocity a (rad/s); throws on |a| > a_max.
  const LatentVec& step(double a);

  // Independent copy for imagination; the parent is unaffected.
  LatentSession branch() const { return *this; }

  // Encoding of the state one step ahead without advancing this session.
  LatentVec peek(double a) const;

  // Episode-termination signal of the environment box. Leaving the box ends
  // an episode but is not a failure.
  bool in_bounds() const { return sim::in_bounds(hidden_, params_); }

 private:
  friend sim::PrivilegedState privileged::hidden_state(const LatentSession& session);

  EncoderPtr encoder_;
  sim::DubinsParams params_;
  sim::PrivilegedState hidden_;
  LatentVec latent_;
};

}  // namespace lsf::latent
