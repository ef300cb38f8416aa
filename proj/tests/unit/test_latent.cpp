#include <cmath>

#include "doctest.h"
#include "lsf/common/angles.hpp"
#include "lsf/latent/projector.hpp"
#include "lsf/latent/session.hpp"
#include "lsf/nn/checkpoint.hpp"

using namespace lsf;

TEST_CASE("encoder is deterministic, bounded and separates distinct states") {
  const latent::Encoder enc;
  const sim::PrivilegedState s{0.3, -0.7, 1.1};
  CHECK((enc.encode(s) - enc.encode(s)).norm() == 0.0f);
  CHECK(enc.latent_dim() == 16);
  Rng rng(3);
  std::vector<sim::PrivilegedState> pts;
  for (int i = 0; i < 300; ++i) pts.push_back({uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5), uniform(rng, -kPi, kPi)});
  const auto z = enc.encode_batch(pts);
  CHECK(z.cwiseAbs().maxCoeff() < 1.0f);
  double min_dist = 1e9;
  for (int i = 0; i < 300; ++i) {
    CHECK((z.col(i) - enc.encode(pts[i])).cwiseAbs().maxCoeff() < 1e-6f);
    for (int j = i + 1; j < 300; ++j) min_dist = std::min(min_dist, static_cast<double>((z.col(i) - z.col(j)).norm()));
  }
  CHECK(min_dist > 0.0);
}

TEST_CASE("session: step matches encode(step), branches are isolated") {
  const auto enc = std::make_shared<const latent::Encoder>();
  const sim::DubinsParams p;
  latent::LatentSession a(enc, p, {0.1, 0.2, 0.3});
  const auto expected = enc->encode(sim::step({0.1, 0.2, 0.3}, 0.7, p));
  const auto peeked = a.peek(0.7);
  CHECK((peeked - expected).norm() == 0.0f);
  const auto before = a.latent();
  auto b = a.branch();
  for (int i = 0; i < 30; ++i) b.step(0.5);
  CHECK((a.latent() - before).norm() == 0.0f);
  a.step(0.7);
  CHECK((a.latent() - expected).norm() == 0.0f);
  latent::LatentSession c(enc, p, {0.1, 0.2, 0.3});
  c.step(0.7);
  CHECK((c.latent() - a.latent()).norm() == 0.0f);
  CHECK_THROWS(a.step(1.3));
}

TEST_CASE("latent margin: self-similarity and zero-weight projector") {
  const latent::Encoder enc;
  const auto proj = latent::FailureProjector::make(16, 5);
  const auto z = enc.encode({0.2, 0.4, 0.0});
  CHECK(latent::latent_margin(proj, z, z) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(latent::raw_latent_margin(z, z) == doctest::Approx(-1.0).epsilon(1e-6));

  auto zero = proj;
  for (auto& l : zero.mutable_net().mutable_layers()) {
    l.weight.setZero();
    l.bias.setZero();
  }
  zero.mutable_net().mutable_layers().back().offset.setLinSpaced(-1.0f, 1.0f);
  const auto o1 = zero.project(enc.encode({1.0, 1.0, 1.0}));
  const auto o2 = zero.project(enc.encode({-1.0, 0.0, -2.0}));
  CHECK((o1 - o2).norm() == 0.0f);
  CHECK((o1 - zero.net().layers().back().offset).norm() < 1e-6f);
  // Every projected vector is the offset, so the cosine is 1.
  CHECK(latent::latent_margin(zero, enc.encode({1, 1, 1}), enc.encode({0, 0, 0})) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("projector training: zero epochs returns the initial weights; fixed seed is deterministic") {
  const auto data = sim::generate_dataset(60, sim::DubinsParams{}, 1);
  const latent::Encoder enc;
  latent::ProjectorTrainConfig cfg;
  cfg.pair_count = 2000;
  cfg.heldout_pairs = 500;
  cfg.epochs = 0;
  cfg.seed = 9;
  const auto r0 = latent::train_projector(data, enc, cfg);
  CHECK(nn::serialize_mlp(r0.projector.net()) == nn::serialize_mlp(latent::FailureProjector::make(16, 9).net()));
  CHECK(std::isfinite(r0.heldout_mse));
  cfg.epochs = 3;
  const auto r1 = latent::train_projector(data, enc, cfg);
  const auto r2 = latent::train_projector(data, enc, cfg);
  CHECK(nn::mlp_checksum(r1.projector.net()) == nn::mlp_checksum(r2.projector.net()));
  CHECK(r1.heldout_mse < r0.heldout_mse);
  CHECK_THROWS(latent::train_projector(sim::Dataset{}, enc, cfg));
}

TEST_CASE("margin kind names round trip") {
  CHECK(latent::parse_margin_kind(latent::margin_kind_name(latent::MarginKind::raw)) == latent::MarginKind::raw);
  CHECK(latent::parse_margin_kind("projected") == latent::MarginKind::projected);
  CHECK_THROWS(latent::parse_margin_kind("nope"));
}
