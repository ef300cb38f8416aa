#include <cmath>
#include <sstream>

#include "../support/checks.hpp"
#include "doctest.h"
#include "lsf/nn/adamw.hpp"
#include "lsf/nn/checkpoint.hpp"
#include "lsf/nn/cosine.hpp"
#include "lsf/nn/mlp.hpp"

using namespace lsf;
using nn::Activation;

namespace {

nn::MlpF single_layer(int n, float w_diag, float bias) {
  nn::DenseLayer<float> l;
  l.weight = nn::Mat<float>::Identity(n, n) * w_diag;
  l.bias = nn::Vec<float>::Constant(n, bias);
  return nn::MlpF(n, {l});
}

}  // namespace

TEST_CASE("identity layer passes input through; zero weights give the bias") {
  nn::VecF x(3);
  x << 0.5f, -1.0f, 2.0f;
  CHECK((single_layer(3, 1.0f, 0.0f).forward_one(x) - x).cwiseAbs().maxCoeff() == 0.0f);
  const auto b = single_layer(3, 0.0f, 0.25f).forward_one(x);
  for (int i = 0; i < 3; ++i) CHECK(b(i) == 0.25f);
}

TEST_CASE("forward is deterministic and checks shapes") {
  Rng rng(1);
  const auto net = nn::MlpF::make(4, {{8, true, Activation::silu}, {2, false, Activation::tanh}}, rng);
  nn::MatF x = nn::MatF::Random(4, 7);
  CHECK((net.forward(x) - net.forward(x)).cwiseAbs().maxCoeff() == 0.0f);
  CHECK_THROWS_AS(net.forward(nn::MatF::Random(3, 2)), nn::ShapeError);
}

TEST_CASE("backward rejects a stale cache and gives zero gradients for zero output grad") {
  Rng rng(2);
  auto net = nn::MlpF::make(3, {{5, true, Activation::relu}, {1, false, Activation::identity}}, rng);
  nn::ForwardCache<float> cache;
  const nn::MatF x = nn::MatF::Random(3, 4);
  net.forward(x, &cache);
  auto g = nn::Gradients<float>::zeros_like(net);
  net.backward(cache, nn::MatF::Zero(1, 4), &g);
  CHECK(g.max_abs() == 0.0f);
  net.mutable_layers()[0].bias(0) += 1.0f;
  CHECK_THROWS(net.backward(cache, nn::MatF::Ones(1, 4), &g));
}

TEST_CASE("finite-difference gradient suite: every layer type and the cosine head") {
  const auto r = checks::run_gradient_suite(1000, 17);
  INFO(r.worst_case);
  CHECK(r.probes >= 1000);
  CHECK(r.failures == 0);
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("cosine similarity") {
  nn::VecF u(3), v(3);
  u << 1, 2, 3;
  CHECK(nn::cosine_similarity(u, u) == doctest::Approx(1.0));
  u << 1, 0, 0;
  v << 0, 5, 0;
  CHECK(nn::cosine_similarity(u, v) == 0.0);
  CHECK_THROWS_AS(nn::cosine_similarity(u, nn::VecF::Zero(3).eval()), nn::DegenerateNormError);
  const auto g = nn::cosine_with_grad(nn::Vec<double>(nn::Vec<double>::Random(5)), nn::Vec<double>(nn::Vec<double>::Random(5)));
  CHECK(std::isfinite(g.value));
}

TEST_CASE("adamw: hand-computed single step on a one-parameter net") {
  nn::DenseLayer<double> l;
  l.weight = nn::Mat<double>::Constant(1, 1, 0.5);
  l.bias = nn::Vec<double>::Constant(1, 0.0);
  nn::Mlp<double> net(1, {l});
  nn::AdamWConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.01;
  auto opt = nn::OptimState<double>::make(net, cfg);
  auto g = nn::Gradients<double>::zeros_like(net);
  g.layers[0].weight(0, 0) = 2.0;
  nn::adamw_step(net, g, opt);
  // Decoupled decay, then m̂ = g, v̂ = g², update = lr·g/(|g| + eps).
  const double decayed = 0.5 * (1.0 - 0.1 * 0.01);
  const double expected = decayed - 0.1 * 2.0 / (2.0 + cfg.eps);
  CHECK(std::abs(net.layers()[0].weight(0, 0) - expected) < 1e-12);
  CHECK(net.layers()[0].bias(0) == 0.0);
}

TEST_CASE("adamw: zero gradient without decay leaves parameters; constant gradient descends") {
  Rng rng(4);
  auto net = nn::Mlp<double>::make(2, {{3, true, Activation::relu}, {1, false, Activation::identity}}, rng);
  const auto before = net;
  nn::AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  auto opt = nn::OptimState<double>::make(net, cfg);
  auto g = nn::Gradients<double>::zeros_like(net);
  nn::adamw_step(net, g, opt);
  CHECK(net.layers()[0].weight == before.layers()[0].weight);
  g.layers[1].bias(0) = 0.3;
  for (int i = 0; i < 50; ++i) nn::adamw_step(net, g, opt);
  CHECK(net.layers()[1].bias(0) < before.layers()[1].bias(0));
}

TEST_CASE("polyak update interpolates") {
  Rng rng(5);
  auto a = nn::MlpF::make(2, {{2, false, Activation::identity}}, rng);
  auto b = nn::MlpF::make(2, {{2, false, Activation::identity}}, rng);
  const float a0 = a.layers()[0].weight(0, 0), b0 = b.layers()[0].weight(0, 0);
  nn::polyak_update(a, b, 0.25);
  CHECK(a.layers()[0].weight(0, 0) == doctest::Approx(0.75 * a0 + 0.25 * b0));
}

TEST_CASE("checkpoint round trip preserves bits and checksum") {
  Rng rng(6);
  const auto net = nn::MlpF::make(16, {{16, true, Activation::silu}, {32, true, Activation::identity}}, rng);
  std::stringstream buf;
  nn::write_mlp(buf, net);
  const auto back = nn::read_mlp(buf);
  CHECK(nn::serialize_mlp(back) == nn::serialize_mlp(net));
  CHECK(nn::mlp_checksum(back) == nn::mlp_checksum(net));
  std::stringstream bad("XXXX");
  CHECK_THROWS(nn::read_mlp(bad));
}
