#include "lsf/latent/session.hpp"

#include <stdexcept>

namespace lsf::latent {

LatentSession::LatentSession(EncoderPtr encoder, sim::DubinsParams params, const sim::PrivilegedState& start)
    : encoder_(std::move(encoder)), params_(params), hidden_(start) {
  if (!encoder_) throw std::invalid_argument("LatentSession: null encoder");
  params_.validate();
  latent_ = encoder_->encode(hidden_);
}

const LatentVec& LatentSession::step(double a) {
  hidden_ = sim::step(hidden_, a, params_);
  latent_ = encoder_->encode(hidden_);
  return latent_;
}

LatentVec LatentSession::peek(double a) const { return encoder_->encode(sim::step(hidden_, a, params_)); }

namespace privileged {
sim::PrivilegedState hidden_state(const LatentSession& session) { return session.hidden_; }
}  // namespace privileged

}  // namespace lsf::latent
