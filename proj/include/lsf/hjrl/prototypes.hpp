#pragma once

#include <cstdint>
#include <vector>

#include "lsf/nn/mlp.hpp"

namespace lsf::hjrl {

// K-means centers in latent space (one column per center).
struct PrototypeSet {
  nn::MatF centers;
  std::vector<int> assignment;          // per fitted point
  std::vector<double> objective_trace;  // sum of squared distances per Lloyd iteration
  int iterations = 0;

  int size() const { return static_cast<int>(centers.cols()); }
  bool empty() const { return centers.cols() == 0; }
  int nearest_index(const nn::VecF& z) const;
  nn::VecF nearest(const nn::VecF& z) const { return centers.col(nearest_index(z)); }
};

// Lloyd iterations from k-means++ seeding until assignments stop changing.
// An emptied cluster is re-seeded at the point farthest from its current
// center. Throws if there are fewer than k distinct points.
PrototypeSet fit_prototypes(const nn::MatF& points, int k, std::uint64_t seed, int max_iter = 300);

}  // namespace lsf::hjrl
