#pragma once

#include <cmath>
#include <cstdint>

#include "lsf/nn/mlp.hpp"

namespace lsf::nn {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct OptimState {
  AdamWConfig config;
  std::uint64_t step = 0;
  Gradients<T> first_moment;
  Gradients<T> second_moment;

  static OptimState make(const Mlp<T>& net, const AdamWConfig& cfg) {
    OptimState s;
    s.config = cfg;
    s.first_moment = Gradients<T>::zeros_like(net);
    s.second_moment = Gradients<T>::zeros_like(net);
    return s;
  }
};

// Decoupled weight decay (p <- p (1 - lr wd)) followed by the bias-corrected
// Adam update.
template <typename T>
void adamw_step(Mlp<T>& net, Gradients<T>& grads, OptimState<T>& opt) {
  auto& layers = net.mutable_layers();
  if (grads.layers.size() != layers.size() || opt.first_moment.layers.size() != layers.size()) {
    throw ShapeError("adamw_step: gradient/optimizer state does not match network");
  }
  opt.step += 1;
  const auto& c = opt.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step));
  const double decay = 1.0 - c.learning_rate * c.weight_decay;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    auto p = layers[li].tensors();
    auto g = grads.layers[li].tensors();
    auto m = opt.first_moment.layers[li].tensors();
    auto v = opt.second_moment.layers[li].tensors();
    if (p.size() != g.size() || p.size() != m.size()) throw ShapeError("adamw_step: layer tensor count mismatch");
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (p[t].size() != g[t].size() || p[t].size() != m[t].size()) {
        throw ShapeError("adamw_step: tensor shape mismatch");
      }
      for (std::size_t k = 0; k < p[t].size(); ++k) {
        const double gk = static_cast<double>(g[t][k]);
        const double mk = c.beta1 * static_cast<double>(m[t][k]) + (1.0 - c.beta1) * gk;
        const double vk = c.beta2 * static_cast<double>(v[t][k]) + (1.0 - c.beta2) * gk * gk;
        m[t][k] = static_cast<T>(mk);
        v[t][k] = static_cast<T>(vk);
        double pk = static_cast<double>(p[t][k]) * decay;
        pk -= c.learning_rate * (mk / bc1) / (std::sqrt(vk / bc2) + c.eps);
        p[t][k] = static_cast<T>(pk);
      }
    }
  }
}

// target <- (1 - tau) target + tau online
template <typename T>
void polyak_update(Mlp<T>& target, const Mlp<T>& online, double tau) {
  auto& tl = target.mutable_layers();
  const auto& ol = online.layers();
  if (tl.size() != ol.size()) throw ShapeError("polyak_update: architecture mismatch");
  const T keep = static_cast<T>(1.0 - tau);
  const T take = static_cast<T>(tau);
  for (std::size_t i = 0; i < tl.size(); ++i) {
    tl[i].weight = keep * tl[i].weight + take * ol[i].weight;
    tl[i].bias = keep * tl[i].bias + take * ol[i].bias;
    if (tl[i].layer_norm) {
      tl[i].gain = keep * tl[i].gain + take * ol[i].gain;
      tl[i].offset = keep * tl[i].offset + take * ol[i].offset;
    }
  }
}

}  // namespace lsf::nn
