#include "lsf/hjrl/train.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <cmath>
#include <stdexcept>

#include "lsf/latent/session.hpp"
#include "lsf/nn/adamw.hpp"
#include "lsf/nn/cosine.hpp"

namespace lsf::hjrl {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int condition_dim)
    : capacity_(capacity),
      s_(state_dim, static_cast<Eigen::Index>(capacity)),
      c_(condition_dim, static_cast<Eigen::Index>(capacity)),
      s_next_(state_dim, static_cast<Eigen::Index>(capacity)),
      action_(static_cast<Eigen::Index>(capacity)),
      margin_(static_cast<Eigen::Index>(capacity)) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::add(const nn::VecF& s, const nn::VecF& c, float action, float margin, const nn::VecF& s_next) {
  const auto h = static_cast<Eigen::Index>(head_);
  s_.col(h) = s;
  c_.col(h) = c;
  s_next_.col(h) = s_next;
  action_(h) = action;
  margin_(h) = margin;
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

ReplayBuffer::Batch ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("ReplayBuffer: empty");
  Batch b;
  const auto n = static_cast<Eigen::Index>(batch);
  b.s.resize(s_.rows(), n);
  b.c.resize(c_.rows(), n);
  b.s_next.resize(s_.rows(), n);
  b.action.resize(1, n);
  b.margin.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(uniform_index(rng, size_));
    b.s.col(i) = s_.col(k);
    b.c.col(i) = c_.col(k);
    b.s_next.col(i) = s_next_.col(k);
    b.action(0, i) = action_(k);
    b.margin(i) = margin_(k);
  }
  return b;
}

nn::MatF constraint_latents_from_dataset(const sim::Dataset& data, const latent::Encoder& encoder, std::size_t count,
                                         std::uint64_t seed) {
  const sim::StateIndex index(data);
  if (index.size() == 0) throw std::invalid_argument("constraint_latents_from_dataset: empty dataset");
  Rng rng(seed);
  nn::MatF out(encoder.latent_dim(), static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const auto& s = index.at(uniform_index(rng, index.size()));
    out.col(static_cast<Eigen::Index>(i)) = encoder.encode({s.x, s.y, 0.0});
  }
  return out;
}

namespace {

nn::MatF stack_rows(std::initializer_list<const nn::MatF*> parts) {
  Eigen::Index rows = 0;
  const Eigen::Index cols = (*parts.begin())->cols();
  for (const auto* p : parts) rows += p->rows();
  nn::MatF out(rows, cols);
  Eigen::Index r = 0;
  for (const auto* p : parts) {
    out.middleRows(r, p->rows()) = *p;
    r += p->rows();
  }
  return out;
}

}  // namespace

FilterTrainResult train_filter(const FilterTrainConfig& cfg, const sim::Dataset& data, latent::EncoderPtr encoder,
                               std::shared_ptr<const latent::FailureProjector> projector,
                               const TrainProgress& progress) {
  if (!encoder) throw std::invalid_argument("train_filter: null encoder");
  if (data.empty()) throw std::invalid_argument("train_filter: empty dataset");
  const bool needs_projector =
      conditioning_uses_projector(cfg.conditioning) || cfg.margin == latent::MarginKind::projected;
  if (needs_projector && !projector) throw std::invalid_argument("train_filter: this configuration needs a projector");
  if (cfg.batch == 0 || cfg.warmup < cfg.batch) {
    throw std::invalid_argument("train_filter: warmup must provide at least one full batch");
  }
  if (cfg.replay_capacity < cfg.batch) throw std::invalid_argument("train_filter: replay smaller than a batch");
  if (cfg.max_imagination_steps < 1) throw std::invalid_argument("train_filter: need at least one imagination step");

  const auto t_start = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  FilterTrainResult result;
  FilterNets& nets = result.nets;
  nets = FilterNets::make(cfg.conditioning, cfg.margin, encoder->latent_dim(), cfg.hidden, projector, cfg.seed + 1);
  nets.gamma = {cfg.gamma_start, cfg.gamma_end, cfg.gamma_anneal_fraction, cfg.steps};
  if (cfg.conditioning == Conditioning::zp) {
    const nn::MatF pts = constraint_latents_from_dataset(data, *encoder, cfg.prototype_points, cfg.seed + 2);
    nets.prototypes = fit_prototypes(pts, cfg.prototypes, cfg.seed + 3);
  }

  const sim::StateIndex index(data);
  const sim::DubinsParams params{};
  ReplayBuffer replay(cfg.replay_capacity, nets.state_dim(), nets.condition_dim());

  auto critic_opt = nn::OptimState<float>::make(nets.critic, {cfg.critic_lr, cfg.weight_decay, 0.9, 0.999, 1e-8});
  auto actor_opt = nn::OptimState<float>::make(nets.actor, {cfg.actor_lr, cfg.weight_decay, 0.9, 0.999, 1e-8});
  nn::Gradients<float> critic_grads = nn::Gradients<float>::zeros_like(nets.critic);
  nn::Gradients<float> actor_grads = nn::Gradients<float>::zeros_like(nets.actor);

  std::optional<latent::LatentSession> session;
  int episode_steps = 0;
  nn::VecF cond;            // strategy-space constraint
  nn::VecF margin_target;   // constraint in margin space
  auto margin_of = [&](const latent::LatentVec& z) {
    if (cfg.margin == latent::MarginKind::raw) return -nn::cosine_similarity(z, margin_target);
    return -nn::cosine_similarity(projector->project(z), margin_target);
  };

  double window_critic = 0.0, window_actor = 0.0;
  int window_n = 0;
  long long updates = 0;

  while (updates < cfg.steps) {
    if (!session || episode_steps >= cfg.max_imagination_steps || !session->in_bounds()) {
      const auto& start = index.at(uniform_index(rng, index.size()));
      const auto& c = index.at(uniform_index(rng, index.size()));
      session.emplace(encoder, params, start);
      const latent::LatentVec zc = encoder->encode({c.x, c.y, 0.0});
      cond = nets.condition_input(zc);
      if (cfg.margin == latent::MarginKind::raw) {
        margin_target = zc;
      } else {
        margin_target = latent::constraint_projection(*projector, *encoder, c.x, c.y, cfg.average_constraint_headings);
      }
      episode_steps = 0;
    }
    const latent::LatentVec z = session->latent();
    const nn::VecF s_in = nets.state_inputs(nn::MatF(z)).col(0);
    double a;
    if (replay.size() < cfg.warmup) {
      a = uniform(rng, -1.0, 1.0);
    } else {
      a = static_cast<double>(nets.actions(nn::MatF(s_in), nn::MatF(cond))(0, 0));
      a = std::clamp(a + normal(rng, 0.0, cfg.exploration_sigma), -1.0, 1.0);
    }
    const double l = margin_of(z);
    const latent::LatentVec z_next = session->step(a * params.a_max);
    ++episode_steps;
    replay.add(s_in, cond, static_cast<float>(a), static_cast<float>(l), nets.state_inputs(nn::MatF(z_next)).col(0));

    if (replay.size() < cfg.warmup) continue;

    const double gamma = nets.gamma.at(updates);
    const auto b = replay.sample(cfg.batch, rng);
    const auto n = static_cast<double>(cfg.batch);

    // Critic regression onto the safety Bellman target.
    const nn::MatF a_next = nets.actor_target.forward(stack_rows({&b.s_next, &b.c}));
    const nn::MatF q_next = nets.critic_target.forward(stack_rows({&b.s_next, &b.c, &a_next}));
    nn::ForwardCache<float> critic_cache;
    const nn::MatF q = nets.critic.forward(stack_rows({&b.s, &b.c, &b.action}), &critic_cache);
    nn::MatF dq(1, q.cols());
    double critic_loss = 0.0;
    for (Eigen::Index i = 0; i < q.cols(); ++i) {
      const double y = critic_target(b.margin(i), gamma, static_cast<double>(q_next(0, i)));
      const double e = static_cast<double>(q(0, i)) - y;
      critic_loss += e * e;
      dq(0, i) = static_cast<float>(2.0 * e / n);
    }
    critic_loss /= n;
    nets.critic.backward(critic_cache, dq, &critic_grads);
    nn::adamw_step(nets.critic, critic_grads, critic_opt);

    // Actor ascent on Q through the updated critic.
    nn::ForwardCache<float> actor_cache;
    const nn::MatF sc = stack_rows({&b.s, &b.c});
    const nn::MatF pa = nets.actor.forward(sc, &actor_cache);
    nn::ForwardCache<float> q_cache;
    const nn::MatF qa = nets.critic.forward(stack_rows({&sc, &pa}), &q_cache);
    const double actor_loss = -static_cast<double>(qa.cast<double>().mean());
    const nn::MatF dqa = nn::MatF::Constant(1, qa.cols(), static_cast<float>(-1.0 / n));
    const nn::MatF dx = nets.critic.backward(q_cache, dqa, nullptr);
    nets.actor.backward(actor_cache, dx.bottomRows(1), &actor_grads);
    nn::adamw_step(nets.actor, actor_grads, actor_opt);

    nn::polyak_update(nets.critic_target, nets.critic, cfg.tau);
    nn::polyak_update(nets.actor_target, nets.actor, cfg.tau);
    ++updates;

    window_critic += critic_loss;
    window_actor += actor_loss;
    ++window_n;
    if (window_n == cfg.log_every || updates == cfg.steps) {
      result.critic_loss.push_back(window_critic / window_n);
      result.actor_loss.push_back(window_actor / window_n);
      result.gamma.push_back(gamma);
      if (progress) progress(updates, result.critic_loss.back(), result.actor_loss.back(), gamma);
      window_critic = window_actor = 0.0;
      window_n = 0;
    }
  }
  nets.steps_trained = updates;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

}  // namespace lsf::hjrl
