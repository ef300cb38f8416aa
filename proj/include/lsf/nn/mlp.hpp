#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsf/common/rng.hpp"

namespace lsf::nn {

enum class Activation : std::uint8_t { identity = 0, relu = 1, silu = 2, tanh = 3 };

const char* activation_name(Activation a);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct LayerSpec {
  int out = 0;
  bool layer_norm = false;
  Activation activation = Activation::identity;
};

// Linear -> optional LayerNorm -> activation.
template <typename T>
struct DenseLayer {
  Mat<T> weight;  // out x in
  Vec<T> bias;
  bool layer_norm = false;
  Vec<T> gain;    // present iff layer_norm
  Vec<T> offset;  // present iff layer_norm
  Activation activation = Activation::identity;

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }

  // Flat views in checkpoint order: weight, bias, gain, offset.
  std::vector<std::span<T>> tensors() {
    std::vector<std::span<T>> t{{weight.data(), static_cast<std::size_t>(weight.size())},
                                {bias.data(), static_cast<std::size_t>(bias.size())}};
    if (layer_norm) {
      t.emplace_back(gain.data(), static_cast<std::size_t>(gain.size()));
      t.emplace_back(offset.data(), static_cast<std::size_t>(offset.size()));
    }
    return t;
  }
};

inline constexpr double kLayerNormEps = 1e-6;

template <typename T>
struct LayerCache {
  Mat<T> input;       // in x batch
  Mat<T> normalized;  // LayerNorm xhat (empty when no LayerNorm)
  Vec<double> inv_std;
  Mat<T> pre_activation;
  Mat<T> output;
};

template <typename T>
class Mlp;

template <typename T>
struct ForwardCache {
  const Mlp<T>* owner = nullptr;
  std::uint64_t version = 0;
  std::vector<LayerCache<T>> layers;
};

// Per-parameter gradients; mirrors the owning network layer by layer.
template <typename T>
struct Gradients {
  std::vector<DenseLayer<T>> layers;

  static Gradients zeros_like(const Mlp<T>& net);
  std::vector<std::span<T>> tensors();
  void set_zero();
  T max_abs() const;
};

template <typename T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(int input_dim, std::vector<DenseLayer<T>> layers);

  // Weights uniform in +-1/sqrt(fan_in), biases 0, LayerNorm gain 1 / offset 0.
  static Mlp make(int input_dim, const std::vector<LayerSpec>& specs, Rng& rng);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return layers_.empty() ? input_dim_ : layers_.back().out_dim(); }
  const std::vector<DenseLayer<T>>& layers() const { return layers_; }
  std::size_t parameter_count() const;

  // Mutable access invalidates outstanding caches.
  std::vector<DenseLayer<T>>& mutable_layers() {
    ++version_;
    return layers_;
  }
  std::uint64_t version() const { return version_; }

  // Columns are samples. cache may be null for inference.
  Mat<T> forward(const Mat<T>& input, ForwardCache<T>* cache = nullptr) const;
  Vec<T> forward_one(const Vec<T>& input) const;

  // Returns d(loss)/d(input). Parameter gradients are written to grads when
  // non-null (overwriting previous contents).
  Mat<T> backward(const ForwardCache<T>& cache, const Mat<T>& output_grad, Gradients<T>* grads) const;

  template <typename U>
  Mlp<U> cast() const;

  bool all_finite() const;

 private:
  void check_chain() const;

  int input_dim_ = 0;
  std::vector<DenseLayer<T>> layers_;
  std::uint64_t version_ = 0;
};

// ---------------------------------------------------------------------------

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::silu: return "silu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

namespace detail {

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void apply_activation(Activation act, const Mat<T>& pre, Mat<T>& out) {
  switch (act) {
    case Activation::identity: out = pre; break;
    case Activation::relu: out = pre.cwiseMax(T(0)); break;
    case Activation::silu: out = pre.unaryExpr([](T x) { return x * sigmoid(x); }); break;
    case Activation::tanh: out = pre.array().tanh().matrix(); break;
  }
}

// grad wrt pre-activation given grad wrt output.
template <typename T>
Mat<T> activation_backward(Activation act, const Mat<T>& pre, const Mat<T>& out, const Mat<T>& dout) {
  switch (act) {
    case Activation::identity: return dout;
    case Activation::relu: return (pre.array() > T(0)).select(dout, T(0));
    case Activation::silu: {
      Mat<T> d = pre.unaryExpr([](T x) {
        const T s = sigmoid(x);
        return s * (T(1) + x * (T(1) - s));
      });
      return d.cwiseProduct(dout);
    }
    case Activation::tanh: return (T(1) - out.array().square()).matrix().cwiseProduct(dout);
  }
  return dout;
}

}  // namespace detail

template <typename T>
Gradients<T> Gradients<T>::zeros_like(const Mlp<T>& net) {
  Gradients g;
  for (const auto& l : net.layers()) {
    DenseLayer<T> z;
    z.weight = Mat<T>::Zero(l.weight.rows(), l.weight.cols());
    z.bias = Vec<T>::Zero(l.bias.size());
    z.layer_norm = l.layer_norm;
    if (l.layer_norm) {
      z.gain = Vec<T>::Zero(l.gain.size());
      z.offset = Vec<T>::Zero(l.offset.size());
    }
    z.activation = l.activation;
    g.layers.push_back(std::move(z));
  }
  return g;
}

template <typename T>
std::vector<std::span<T>> Gradients<T>::tensors() {
  std::vector<std::span<T>> all;
  for (auto& l : layers) {
    for (auto s : l.tensors()) all.push_back(s);
  }
  return all;
}

template <typename T>
void Gradients<T>::set_zero() {
  for (auto s : tensors()) std::fill(s.begin(), s.end(), T(0));
}

template <typename T>
T Gradients<T>::max_abs() const {
  T m(0);
  for (const auto& l : layers) {
    m = std::max(m, l.weight.cwiseAbs().maxCoeff());
    m = std::max(m, l.bias.cwiseAbs().maxCoeff());
    if (l.layer_norm) {
      m = std::max(m, l.gain.cwiseAbs().maxCoeff());
      m = std::max(m, l.offset.cwiseAbs().maxCoeff());
    }
  }
  return m;
}

template <typename T>
Mlp<T>::Mlp(int input_dim, std::vector<DenseLayer<T>> layers) : input_dim_(input_dim), layers_(std::move(layers)) {
  check_chain();
}

template <typename T>
void Mlp<T>::check_chain() const {
  int dim = input_dim_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.in_dim() != dim || l.bias.size() != l.out_dim()) {
      throw ShapeError("Mlp: layer " + std::to_string(i) + " does not chain");
    }
    if (l.layer_norm && (l.gain.size() != l.out_dim() || l.offset.size() != l.out_dim())) {
      throw ShapeError("Mlp: layer " + std::to_string(i) + " LayerNorm shape mismatch");
    }
    dim = l.out_dim();
  }
}

template <typename T>
Mlp<T> Mlp<T>::make(int input_dim, const std::vector<LayerSpec>& specs, Rng& rng) {
  std::vector<DenseLayer<T>> layers;
  int fan_in = input_dim;
  for (const auto& spec : specs) {
    DenseLayer<T> l;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    l.weight.resize(spec.out, fan_in);
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) l.weight(r, c) = static_cast<T>(uniform(rng, -bound, bound));
    }
    l.bias = Vec<T>::Zero(spec.out);
    l.layer_norm = spec.layer_norm;
    if (spec.layer_norm) {
      l.gain = Vec<T>::Ones(spec.out);
      l.offset = Vec<T>::Zero(spec.out);
    }
    l.activation = spec.activation;
    layers.push_back(std::move(l));
    fan_in = spec.out;
  }
  return Mlp(input_dim, std::move(layers));
}

template <typename T>
std::size_t Mlp<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    if (l.layer_norm) n += static_cast<std::size_t>(l.gain.size() + l.offset.size());
  }
  return n;
}

template <typename T>
Mat<T> Mlp<T>::forward(const Mat<T>& input, ForwardCache<T>* cache) const {
  if (input.rows() != input_dim_) {
    throw ShapeError("Mlp::forward: expected input dim " + std::to_string(input_dim_) + ", got " +
                     std::to_string(input.rows()));
  }
  if (cache) {
    cache->owner = this;
    cache->version = version_;
    cache->layers.resize(layers_.size());
  }
  Mat<T> x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    Mat<T> z = l.weight * x;
    z.colwise() += l.bias;
    Mat<T> xhat;
    Vec<double> inv_std;
    if (l.layer_norm) {
      const Eigen::Index n = z.rows();
      xhat.resize(z.rows(), z.cols());
      inv_std.resize(z.cols());
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        double mean = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) mean += static_cast<double>(z(r, c));
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
          const double d = static_cast<double>(z(r, c)) - mean;
          var += d * d;
        }
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std(c) = is;
        for (Eigen::Index r = 0; r < n; ++r) {
          xhat(r, c) = static_cast<T>((static_cast<double>(z(r, c)) - mean) * is);
        }
      }
      z = (xhat.array().colwise() * l.gain.array()).matrix();
      z.colwise() += l.offset;
    }
    Mat<T> out;
    detail::apply_activation(l.activation, z, out);
    if (cache) {
      auto& lc = cache->layers[i];
      lc.input = std::move(x);
      lc.normalized = std::move(xhat);
      lc.inv_std = std::move(inv_std);
      lc.pre_activation = std::move(z);
      lc.output = out;
    }
    x = std::move(out);
  }
  return x;
}

template <typename T>
Vec<T> Mlp<T>::forward_one(const Vec<T>& input) const {
  Mat<T> in = input;
  Mat<T> out = forward(in, nullptr);
  return out.col(0);
}

template <typename T>
Mat<T> Mlp<T>::backward(const ForwardCache<T>& cache, const Mat<T>& output_grad, Gradients<T>* grads) const {
  if (cache.owner != this || cache.version != version_ || cache.layers.size() != layers_.size()) {
    throw std::logic_error("Mlp::backward: cache is stale or from another network");
  }
  if (output_grad.rows() != output_dim() || output_grad.cols() != cache.layers.back().output.cols()) {
    throw ShapeError("Mlp::backward: output gradient shape mismatch");
  }
  if (grads && grads->layers.size() != layers_.size()) *grads = Gradients<T>::zeros_like(*this);

  Mat<T> d = output_grad;
  for (std::size_t ii = layers_.size(); ii-- > 0;) {
    const auto& l = layers_[ii];
    const auto& lc = cache.layers[ii];
    d = detail::activation_backward(l.activation, lc.pre_activation, lc.output, d);
    if (l.layer_norm) {
      if (grads) {
        auto& g = grads->layers[ii];
        g.gain = d.cwiseProduct(lc.normalized).rowwise().sum();
        g.offset = d.rowwise().sum();
      }
      const Eigen::Index n = d.rows();
      Mat<T> dz(d.rows(), d.cols());
      for (Eigen::Index c = 0; c < d.cols(); ++c) {
        double mean_dxhat = 0.0;
        double mean_dxhat_xhat = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
          const double dxhat = static_cast<double>(d(r, c)) * static_cast<double>(l.gain(r));
          mean_dxhat += dxhat;
          mean_dxhat_xhat += dxhat * static_cast<double>(lc.normalized(r, c));
        }
        mean_dxhat /= static_cast<double>(n);
        mean_dxhat_xhat /= static_cast<double>(n);
        for (Eigen::Index r = 0; r < n; ++r) {
          const double dxhat = static_cast<double>(d(r, c)) * static_cast<double>(l.gain(r));
          dz(r, c) = static_cast<T>(lc.inv_std(c) *
                                    (dxhat - mean_dxhat - static_cast<double>(lc.normalized(r, c)) * mean_dxhat_xhat));
        }
      }
      d = std::move(dz);
    }
    if (grads) {
      auto& g = grads->layers[ii];
      g.weight.noalias() = d * lc.input.transpose();
      g.bias = d.rowwise().sum();
    }
    d = l.weight.transpose() * d;
  }
  return d;
}

template <typename T>
template <typename U>
Mlp<U> Mlp<T>::cast() const {
  std::vector<DenseLayer<U>> out;
  for (const auto& l : layers_) {
    DenseLayer<U> c;
    c.weight = l.weight.template cast<U>();
    c.bias = l.bias.template cast<U>();
    c.layer_norm = l.layer_norm;
    if (l.layer_norm) {
      c.gain = l.gain.template cast<U>();
      c.offset = l.offset.template cast<U>();
    }
    c.activation = l.activation;
    out.push_back(std::move(c));
  }
  return Mlp<U>(input_dim_, std::move(out));
}

template <typename T>
bool Mlp<T>::all_finite() const {
  for (const auto& l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    if (l.layer_norm && (!l.gain.allFinite() || !l.offset.allFinite())) return false;
  }
  return true;
}

using MlpF = Mlp<float>;
using MatF = Mat<float>;
using VecF = Vec<float>;

}  // namespace lsf::nn
