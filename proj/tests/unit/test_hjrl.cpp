#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "lsf/hjrl/prototypes.hpp"
#include "lsf/hjrl/train.hpp"
#include "lsf/nn/checkpoint.hpp"

using namespace lsf;
using hjrl::Conditioning;

TEST_CASE("critic target arithmetic") {
  CHECK(hjrl::critic_target(0.5, 0.0, -3.0) == 0.5);
  CHECK(hjrl::critic_target(0.5, 0.9, 0.2) == doctest::Approx(0.23).epsilon(1e-15));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double l = uniform(rng, -1, 1), g = uniform(rng, 0, 1), q = uniform(rng, -2, 2);
    CHECK(hjrl::critic_target(l, g, q) <= l + 1e-15);
  }
}

TEST_CASE("gamma schedule endpoints") {
  hjrl::GammaSchedule s;
  s.total_steps = 1000;
  CHECK(s.at(0) == 0.85);
  CHECK(s.at(400) == doctest::Approx(0.85 + 0.5 * (0.9999 - 0.85)));
  CHECK(s.at(800) == doctest::Approx(0.9999));
  CHECK(s.at(999) == 0.9999);
}

TEST_CASE("prototypes: single center is the mean; centers are their own nearest") {
  Rng rng(2);
  nn::MatF pts(3, 200);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = static_cast<float>(uniform(rng, -1, 1));
  const auto one = hjrl::fit_prototypes(pts, 1, 3);
  const Eigen::VectorXd mean = pts.cast<double>().rowwise().mean();
  CHECK((one.centers.col(0).cast<double>() - mean).norm() < 1e-5);
  const auto nine = hjrl::fit_prototypes(pts, 9, 3);
  REQUIRE(nine.size() == 9);
  for (int k = 0; k < 9; ++k) CHECK(nine.nearest_index(nine.centers.col(k)) == k);
  for (std::size_t i = 1; i < nine.objective_trace.size(); ++i) {
    CHECK(nine.objective_trace[i] <= nine.objective_trace[i - 1] + 1e-9);
  }
  nn::MatF dup = nn::MatF::Ones(3, 10);
  CHECK_THROWS(hjrl::fit_prototypes(dup, 2, 1));
}

TEST_CASE("conditioning names and strategy input dimensions") {
  for (auto c : {Conditioning::zz, Conditioning::zp, Conditioning::zzt, Conditioning::ztzt}) {
    CHECK(hjrl::parse_conditioning(hjrl::conditioning_name(c)) == c);
  }
  const auto proj = std::make_shared<const latent::FailureProjector>(latent::FailureProjector::make(16, 1));
  const auto ztzt = hjrl::FilterNets::make(Conditioning::ztzt, latent::MarginKind::projected, 16, {8}, proj, 1);
  CHECK(ztzt.state_dim() == 32);
  CHECK(ztzt.condition_dim() == 32);
  const auto zz = hjrl::FilterNets::make(Conditioning::zz, latent::MarginKind::raw, 16, {8}, nullptr, 1);
  CHECK(zz.state_dim() == 16);
  CHECK_THROWS_AS(zz.values(nn::MatF::Zero(16, 2), nn::MatF::Zero(32, 2)), hjrl::ConditioningMismatch);
  CHECK_THROWS(hjrl::FilterNets::make(Conditioning::zzt, latent::MarginKind::projected, 16, {8}, nullptr, 1));
}

TEST_CASE("replay buffer wraps at capacity") {
  hjrl::ReplayBuffer buf(5, 2, 1);
  for (int i = 0; i < 8; ++i) {
    buf.add(nn::VecF::Constant(2, i), nn::VecF::Constant(1, -i), 0.1f * i, static_cast<float>(i), nn::VecF::Constant(2, i + 1));
  }
  CHECK(buf.size() == 5);
  Rng rng(4);
  const auto b = buf.sample(64, rng);
  for (int j = 0; j < 64; ++j) {
    CHECK(b.s(0, j) >= 3.0f);
    CHECK(b.s_next(0, j) == b.s(0, j) + 1.0f);
    CHECK(b.margin(j) == doctest::Approx(b.s(0, j)));
  }
}

TEST_CASE("short training runs are deterministic and checkpoints round trip") {
  const auto data = sim::generate_dataset(80, sim::DubinsParams{}, 3);
  const auto enc = std::make_shared<const latent::Encoder>();
  const auto proj = std::make_shared<const latent::FailureProjector>(latent::FailureProjector::make(16, 2));
  hjrl::FilterTrainConfig cfg;
  cfg.hidden = {16, 16};
  cfg.steps = 300;
  cfg.warmup = 200;
  cfg.batch = 32;
  cfg.prototype_points = 300;
  cfg.log_every = 100;
  for (auto c : {Conditioning::zz, Conditioning::zp, Conditioning::zzt, Conditioning::ztzt}) {
    cfg.conditioning = c;
    const auto a = hjrl::train_filter(cfg, data, enc, proj);
    const auto b = hjrl::train_filter(cfg, data, enc, proj);
    CHECK(a.critic_loss == b.critic_loss);
    CHECK(a.actor_loss == b.actor_loss);
    CHECK(nn::mlp_checksum(a.nets.critic) == nn::mlp_checksum(b.nets.critic));
    CHECK(a.nets.steps_trained == 300);
    CHECK(a.gamma.back() == doctest::Approx(0.9999));

    const auto path = (std::filesystem::temp_directory_path() / "lsf_test.asfn").string();
    hjrl::save_filter(path, a.nets);
    const auto back = hjrl::load_filter(path, proj);
    CHECK(back.conditioning == c);
    CHECK(nn::mlp_checksum(back.actor) == nn::mlp_checksum(a.nets.actor));
    CHECK(back.prototypes.size() == a.nets.prototypes.size());
    const auto z = enc->encode({0.1, 0.2, 0.3});
    const auto zc = enc->encode({-0.5, 0.4, 0.0});
    CHECK(back.value(z, zc) == a.nets.value(z, zc));
    auto other = std::make_shared<const latent::FailureProjector>(latent::FailureProjector::make(16, 3));
    CHECK_THROWS(hjrl::load_filter(path, other));
    std::filesystem::remove(path);
  }
  cfg.conditioning = Conditioning::ztzt;
  CHECK_THROWS(hjrl::train_filter(cfg, data, enc, nullptr));
  cfg.warmup = 10;
  CHECK_THROWS(hjrl::train_filter(cfg, data, enc, proj));
}
