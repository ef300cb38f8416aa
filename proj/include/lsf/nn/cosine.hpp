#pragma once

#include <cmath>
#include <stdexcept>

#include "lsf/nn/mlp.hpp"

namespace lsf::nn {

class DegenerateNormError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kCosineEps = 1e-8;

template <typename T>
struct CosineWithGrad {
  double value = 0.0;
  Vec<T> du;
  Vec<T> dv;
};

// u.v / (|u| |v|). Throws DegenerateNormError on a zero-norm argument.
template <typename T>
double cosine_similarity(const Vec<T>& u, const Vec<T>& v) {
  if (u.size() != v.size()) throw ShapeError("cosine_similarity: length mismatch");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double a = static_cast<double>(u(i));
    const double b = static_cast<double>(v(i));
    uv += a * b;
    uu += a * a;
    vv += b * b;
  }
  if (uu == 0.0 || vv == 0.0) throw DegenerateNormError("cosine_similarity: zero-norm input");
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

template <typename T>
CosineWithGrad<T> cosine_with_grad(const Vec<T>& u, const Vec<T>& v) {
  CosineWithGrad<T> out;
  out.value = cosine_similarity(u, v);
  const double nu = static_cast<double>(u.template cast<double>().norm());
  const double nv = static_cast<double>(v.template cast<double>().norm());
  const Vec<double> ud = u.template cast<double>();
  const Vec<double> vd = v.template cast<double>();
  out.du = (vd / (nu * nv) - out.value * ud / (nu * nu)).template cast<T>();
  out.dv = (ud / (nu * nv) - out.value * vd / (nv * nv)).template cast<T>();
  return out;
}

// Column-wise cosine with the eps guard on the norm product. Returns one
// similarity per column.
template <typename T>
Vec<double> cosine_columns(const Mat<T>& u, const Mat<T>& v, double eps = kCosineEps) {
  if (u.rows() != v.rows() || u.cols() != v.cols()) throw ShapeError("cosine_columns: shape mismatch");
  Vec<double> sims(u.cols());
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    double uv = 0.0, uu = 0.0, vv = 0.0;
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      const double a = static_cast<double>(u(r, c));
      const double b = static_cast<double>(v(r, c));
      uv += a * b;
      uu += a * a;
      vv += b * b;
    }
    sims(c) = uv / std::max(std::sqrt(uu) * std::sqrt(vv), eps);
  }
  return sims;
}

// Backward of cosine_columns: given d(loss)/d(sim) per column, writes the
// gradients with respect to u and v.
template <typename T>
void cosine_columns_backward(const Mat<T>& u, const Mat<T>& v, const Vec<double>& sims, const Vec<double>& dsim,
                             Mat<T>& du, Mat<T>& dv, double eps = kCosineEps) {
  du.resize(u.rows(), u.cols());
  dv.resize(v.rows(), v.cols());
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    double uu = 0.0, vv = 0.0;
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      uu += static_cast<double>(u(r, c)) * static_cast<double>(u(r, c));
      vv += static_cast<double>(v(r, c)) * static_cast<double>(v(r, c));
    }
    const double nu = std::sqrt(uu), nv = std::sqrt(vv);
    const double denom = nu * nv;
    if (denom <= eps) {
      // Guard branch: sim = u.v / eps is linear in each argument.
      for (Eigen::Index r = 0; r < u.rows(); ++r) {
        du(r, c) = static_cast<T>(dsim(c) * static_cast<double>(v(r, c)) / eps);
        dv(r, c) = static_cast<T>(dsim(c) * static_cast<double>(u(r, c)) / eps);
      }
      continue;
    }
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      const double a = static_cast<double>(u(r, c));
      const double b = static_cast<double>(v(r, c));
      du(r, c) = static_cast<T>(dsim(c) * (b / denom - sims(c) * a / uu));
      dv(r, c) = static_cast<T>(dsim(c) * (a / denom - sims(c) * b / vv));
    }
  }
}

}  // namespace lsf::nn
