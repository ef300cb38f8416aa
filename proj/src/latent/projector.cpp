#include "lsf/latent/projector.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lsf/common/angles.hpp"
#include "lsf/nn/adamw.hpp"
#include "lsf/nn/checkpoint.hpp"
#include "lsf/nn/cosine.hpp"

namespace lsf::latent {

FailureProjector::FailureProjector(nn::MlpF net) : net_(std::move(net)) {
  if (net_.output_dim() != kProjectedDim) throw nn::ShapeError("FailureProjector: output dim must be 32");
}

FailureProjector FailureProjector::make(int latent_dim, std::uint64_t seed) {
  Rng rng(seed);
  return FailureProjector(nn::MlpF::make(latent_dim,
                                         {{latent_dim, true, nn::Activation::silu},
                                          {kProjectedDim, true, nn::Activation::identity}},
                                         rng));
}

ProjectedVec FailureProjector::project(const LatentVec& z) const { return net_.forward_one(z); }

nn::MatF FailureProjector::project_batch(const nn::MatF& z) const { return net_.forward(z); }

std::uint64_t FailureProjector::checksum() const { return nn::mlp_checksum(net_); }

const char* margin_kind_name(MarginKind kind) { return kind == MarginKind::raw ? "raw" : "projected"; }

MarginKind parse_margin_kind(const std::string& name) {
  if (name == "projected") return MarginKind::projected;
  if (name == "raw") return MarginKind::raw;
  throw std::invalid_argument("unknown margin kind: " + name);
}

double latent_margin(const FailureProjector& proj, const LatentVec& z, const LatentVec& z_c) {
  const ProjectedVec a = proj.project(z);
  const ProjectedVec b = proj.project(z_c);
  if (a.cast<double>().norm() <= nn::kCosineEps || b.cast<double>().norm() <= nn::kCosineEps) {
    throw nn::DegenerateNormError("latent_margin: projected vector has degenerate norm");
  }
  return -nn::cosine_similarity(a, b);
}

double raw_latent_margin(const LatentVec& z, const LatentVec& z_c) { return -nn::cosine_similarity(z, z_c); }

Eigen::VectorXd margin_columns(MarginKind kind, const FailureProjector* proj, const nn::MatF& z, const nn::MatF& cond) {
  if (kind == MarginKind::raw) return -nn::cosine_columns(z, cond);
  if (!proj) throw std::invalid_argument("margin_columns: projected margin needs a projector");
  return -nn::cosine_columns(proj->project_batch(z), cond);
}

LatentVec constraint_latent(const Encoder& encoder, double x, double y) { return encoder.encode({x, y, 0.0}); }

ProjectedVec constraint_projection(const FailureProjector& proj, const Encoder& encoder, double x, double y,
                                   bool average_headings) {
  if (!average_headings) return proj.project(constraint_latent(encoder, x, y));
  constexpr int kHeadings = 8;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(kProjectedDim);
  for (int h = 0; h < kHeadings; ++h) {
    acc += proj.project(encoder.encode({x, y, -kPi + kTwoPi * h / kHeadings})).cast<double>();
  }
  return (acc / kHeadings).cast<float>();
}

std::vector<StatePair> sample_state_pairs(const sim::StateIndex& index, std::size_t count, Rng& rng) {
  std::vector<StatePair> pairs;
  pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& a = index.at(uniform_index(rng, index.size()));
    const auto& b = index.at(uniform_index(rng, index.size()));
    pairs.push_back({a, b});
  }
  return pairs;
}

namespace {

struct EncodedPairs {
  nn::MatF first;
  nn::MatF second;
  Eigen::VectorXd target;
};

EncodedPairs encode_pairs(const Encoder& encoder, const std::vector<StatePair>& pairs) {
  EncodedPairs e;
  const auto n = static_cast<Eigen::Index>(pairs.size());
  e.first.resize(encoder.latent_dim(), n);
  e.second.resize(encoder.latent_dim(), n);
  e.target.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    e.first.col(i) = encoder.encode(p.first);
    e.second.col(i) = encoder.encode(p.second);
    e.target(i) = sim::ground_truth_similarity(p.first.position(), p.second.position());
  }
  return e;
}

double encoded_mse(const FailureProjector& proj, const EncodedPairs& e) {
  if (e.target.size() == 0) return 0.0;
  const Eigen::VectorXd sims = nn::cosine_columns(proj.project_batch(e.first), proj.project_batch(e.second));
  return (sims - e.target).squaredNorm() / static_cast<double>(e.target.size());
}

}  // namespace

double projector_mse(const FailureProjector& proj, const Encoder& encoder, const std::vector<StatePair>& pairs) {
  return encoded_mse(proj, encode_pairs(encoder, pairs));
}

ProjectorTrainResult train_projector(const sim::Dataset& data, const Encoder& encoder,
                                     const ProjectorTrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train_projector: empty dataset");
  if (cfg.batch_size < 1) throw std::invalid_argument("train_projector: batch_size must be >= 1");
  const sim::StateIndex index(data);
  Rng rng(cfg.seed);
  const auto train_pairs = sample_state_pairs(index, cfg.pair_count, rng);
  const auto heldout_pairs = sample_state_pairs(index, cfg.heldout_pairs, rng);
  const EncodedPairs train = encode_pairs(encoder, train_pairs);
  const EncodedPairs heldout = encode_pairs(encoder, heldout_pairs);

  ProjectorTrainResult result;
  result.projector = FailureProjector::make(encoder.latent_dim(), cfg.seed);
  auto& net = result.projector.mutable_net();
  auto opt = nn::OptimState<float>::make(net, {cfg.learning_rate, cfg.weight_decay, 0.9, 0.999, 1e-8});

  const auto n = static_cast<std::size_t>(train.target.size());
  const std::size_t batches_per_epoch = n == 0 ? 0 : (n + static_cast<std::size_t>(cfg.batch_size) - 1) / cfg.batch_size;
  const double total_steps = static_cast<double>(std::max<std::size_t>(1, batches_per_epoch * std::max(cfg.epochs, 0)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int dz = encoder.latent_dim();
  nn::ForwardCache<float> cache;
  nn::Gradients<float> grads = nn::Gradients<float>::zeros_like(net);
  std::size_t global_step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      const auto b = static_cast<Eigen::Index>(end - start);
      // Both members of every pair go through one forward pass: columns
      // [0, b) are first members, [b, 2b) second members.
      nn::MatF input(dz, 2 * b);
      Eigen::VectorXd target(b);
      for (Eigen::Index i = 0; i < b; ++i) {
        const std::size_t k = order[start + static_cast<std::size_t>(i)];
        input.col(i) = train.first.col(static_cast<Eigen::Index>(k));
        input.col(b + i) = train.second.col(static_cast<Eigen::Index>(k));
        target(i) = train.target(static_cast<Eigen::Index>(k));
      }
      const nn::MatF out = net.forward(input, &cache);
      const nn::MatF u = out.leftCols(b);
      const nn::MatF v = out.rightCols(b);
      const Eigen::VectorXd sims = nn::cosine_columns(u, v);
      const Eigen::VectorXd err = sims - target;
      epoch_loss += err.squaredNorm();
      const Eigen::VectorXd dsim = 2.0 * err / static_cast<double>(b);
      nn::MatF du, dv;
      nn::cosine_columns_backward(u, v, sims, dsim, du, dv);
      nn::MatF dout(out.rows(), out.cols());
      dout.leftCols(b) = du;
      dout.rightCols(b) = dv;
      net.backward(cache, dout, &grads);
      opt.config.learning_rate =
          cfg.learning_rate * 0.5 * (1.0 + std::cos(kPi * static_cast<double>(global_step) / total_steps));
      nn::adamw_step(net, grads, opt);
      ++global_step;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(n, 1)));
  }
  result.train_mse = encoded_mse(result.projector, train);
  result.heldout_mse = encoded_mse(result.projector, heldout);
  return result;
}

double heading_invariance_fraction(const FailureProjector& proj, const Encoder& encoder, std::size_t probes,
                                   double tolerance, std::uint64_t seed) {
  Rng rng(seed);
  const double b = encoder.bound();
  std::size_t ok = 0;
  for (std::size_t i = 0; i < probes; ++i) {
    const double x = uniform(rng, -b, b);
    const double y = uniform(rng, -b, b);
    const double t1 = uniform(rng, -kPi, kPi);
    const double t2 = uniform(rng, -kPi, kPi);
    const sim::PrivilegedState c{uniform(rng, -b, b), uniform(rng, -b, b), 0.0};
    const ProjectedVec pc = proj.project(encoder.encode(c));
    const double s1 = nn::cosine_similarity(proj.project(encoder.encode({x, y, t1})), pc);
    const double s2 = nn::cosine_similarity(proj.project(encoder.encode({x, y, t2})), pc);
    if (std::abs(s1 - s2) <= tolerance) ++ok;
  }
  return probes == 0 ? 1.0 : static_cast<double>(ok) / static_cast<double>(probes);
}

}  // namespace lsf::latent
