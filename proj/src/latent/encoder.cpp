#include "lsf/latent/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lsf/common/rng.hpp"

namespace lsf::latent {

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = uniform(rng, -scale, scale);
  }
  return m;
}

double min_singular_value(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().minCoeff();
}

}  // namespace

Encoder::Encoder(std::uint64_t seed, int latent_dim, double bound, double weight_scale)
    : seed_(seed), latent_dim_(latent_dim), bound_(bound) {
  if (latent_dim < 4) throw std::invalid_argument("Encoder: latent_dim must be >= 4 for injectivity");
  if (!(bound > 0.0) || !(weight_scale > 0.0)) throw std::invalid_argument("Encoder: bound and scale must be positive");
  Rng rng(seed);
  // Rejection keeps the rank conditions strict; with continuous draws it
  // practically never loops.
  for (int attempt = 0;; ++attempt) {
    w1_ = random_matrix(rng, latent_dim, 4, weight_scale);
    w2_ = random_matrix(rng, latent_dim, latent_dim, weight_scale / 4.0);
    if (min_singular_value(w1_) > 1e-3 * weight_scale && min_singular_value(w2_) > 1e-4 * weight_scale) break;
    if (attempt > 100) throw std::runtime_error("Encoder: could not draw well-conditioned weights");
  }
}

Eigen::Vector4d Encoder::features(const sim::PrivilegedState& s) const {
  return {std::clamp(s.x / bound_, -1.0, 1.0), std::clamp(s.y / bound_, -1.0, 1.0), std::cos(s.theta),
          std::sin(s.theta)};
}

LatentVec Encoder::encode(const sim::PrivilegedState& s) const {
  const Eigen::VectorXd hidden = (w1_ * features(s)).array().tanh();
  const Eigen::VectorXd z = (w2_ * hidden).array().tanh();
  return z.cast<float>();
}

nn::MatF Encoder::encode_batch(std::span<const sim::PrivilegedState> states) const {
  nn::MatF out(latent_dim_, static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = encode(states[i]);
  return out;
}

}  // namespace lsf::latent
