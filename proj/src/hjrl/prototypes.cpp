#include "lsf/hjrl/prototypes.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <stdexcept>

#include "lsf/common/rng.hpp"

namespace lsf::hjrl {

namespace {

double sq_dist(const nn::MatF& a, Eigen::Index i, const nn::MatF& b, Eigen::Index j) {
  double d = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double e = static_cast<double>(a(r, i)) - static_cast<double>(b(r, j));
    d += e * e;
  }
  return d;
}

std::size_t distinct_columns(const nn::MatF& points, std::size_t cap) {
  std::set<std::vector<float>> seen;
  for (Eigen::Index c = 0; c < points.cols() && seen.size() < cap; ++c) {
    seen.insert(std::vector<float>(points.col(c).data(), points.col(c).data() + points.rows()));
  }
  return seen.size();
}

}  // namespace

int PrototypeSet::nearest_index(const nn::VecF& z) const {
  if (empty()) throw std::logic_error("PrototypeSet: no centers");
  if (z.size() != centers.rows()) throw nn::ShapeError("PrototypeSet: dimension mismatch");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.cols(); ++c) {
    double d = 0.0;
    for (Eigen::Index r = 0; r < z.size(); ++r) {
      const double e = static_cast<double>(z(r)) - static_cast<double>(centers(r, c));
      d += e * e;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

PrototypeSet fit_prototypes(const nn::MatF& points, int k, std::uint64_t seed, int max_iter) {
  if (k < 1) throw std::invalid_argument("fit_prototypes: k must be >= 1");
  const Eigen::Index n = points.cols();
  if (distinct_columns(points, static_cast<std::size_t>(k)) < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("fit_prototypes: fewer distinct points than clusters");
  }
  Rng rng(seed);
  PrototypeSet ps;
  ps.centers.resize(points.rows(), k);

  // k-means++ seeding.
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  ps.centers.col(0) = points.col(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n))));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], sq_dist(points, i, ps.centers, c - 1));
      total += d2[static_cast<std::size_t>(i)];
    }
    double r = uniform(rng, 0.0, total);
    Eigen::Index pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      r -= d2[static_cast<std::size_t>(i)];
      if (r < 0.0 && d2[static_cast<std::size_t>(i)] > 0.0) {
        pick = i;
        break;
      }
    }
    ps.centers.col(c) = points.col(pick);
  }

  ps.assignment.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    double objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = sq_dist(points, i, ps.centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      objective += best_d;
      if (ps.assignment[static_cast<std::size_t>(i)] != best) {
        ps.assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    ps.objective_trace.push_back(objective);
    ps.iterations = it + 1;
    if (!changed && it > 0) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), k);
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = ps.assignment[static_cast<std::size_t>(i)];
      sums.col(c) += points.col(i).cast<double>();
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        ps.centers.col(c) = (sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)])).cast<float>();
        continue;
      }
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = sq_dist(points, i, ps.centers, ps.assignment[static_cast<std::size_t>(i)]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      ps.centers.col(c) = points.col(far);
      ps.assignment[static_cast<std::size_t>(far)] = c;
    }
  }
  return ps;
}

}  // namespace lsf::hjrl
