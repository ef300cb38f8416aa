#include <cmath>

#include "doctest.h"
#include "lsf/common/log.hpp"
#include "lsf/filter/runtime_filter.hpp"

using namespace lsf;

namespace {

// Nets whose critic returns `value` everywhere and whose actor returns `action`.
hjrl::FilterNets constant_nets(double value, double action) {
  auto nets = hjrl::FilterNets::make(hjrl::Conditioning::zz, latent::MarginKind::raw, 16, {8}, nullptr, 1);
  auto& c = nets.critic.mutable_layers().back();
  c.weight.setZero();
  c.bias.setConstant(static_cast<float>(value));
  auto& a = nets.actor.mutable_layers().back();
  a.weight.setZero();
  a.bias.setConstant(static_cast<float>(std::atanh(action)));
  return nets;
}

conformal::Threshold threshold(double delta, double margin = 0.1) {
  conformal::Threshold t;
  t.delta = delta;
  t.runtime_margin = margin;
  return t;
}

}  // namespace

TEST_CASE("switching law: strict inequality at the boundary") {
  const auto enc = std::make_shared<const latent::Encoder>();
  const latent::LatentSession s(enc, sim::DubinsParams{}, {0, 0, 0});
  const auto zc = enc->encode({1, 1, 0});
  // V = δ + 0.2 with margin 0.1 passes the task action.
  const auto pass = filter::filter_action(s, constant_nets(-0.3, 0.5), zc, threshold(-0.5), 0.3);
  CHECK_FALSE(pass.intervened);
  CHECK(pass.executed_action == 0.3);

  // Exact tie V = δ + margin (all values representable).
  const auto tie = filter::filter_action(s, constant_nets(-0.25, 0.5), zc, threshold(-0.375, 0.125), 0.3);
  CHECK(tie.intervened);
  CHECK(tie.executed_action == doctest::Approx(0.5 * 1.25).epsilon(1e-6));

  const auto at_delta = filter::filter_action(s, constant_nets(-0.5, 0.5), zc, threshold(-0.5), 0.3);
  CHECK(at_delta.intervened);
}

TEST_CASE("sentinel threshold always falls back and warns") {
  std::vector<std::string> warnings;
  set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
  const auto enc = std::make_shared<const latent::Encoder>();
  const latent::LatentSession s(enc, sim::DubinsParams{}, {0, 0, 0});
  const auto d = filter::filter_action(s, constant_nets(100.0, 0.0), enc->encode({1, 1, 0}),
                                       threshold(conformal::kSentinelDelta), 0.3);
  set_warning_sink(nullptr);
  CHECK(d.intervened);
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("provenance and action range are enforced; monitor is pure") {
  const auto enc = std::make_shared<const latent::Encoder>();
  latent::LatentSession s(enc, sim::DubinsParams{}, {0.2, 0.1, 0.4});
  const auto nets = constant_nets(0.3, 0.0);
  auto t = threshold(-0.8);
  t.projector_checksum = 5;
  const auto zc = enc->encode({1, 1, 0});
  CHECK_THROWS_AS(filter::filter_action(s, nets, zc, t, 0.1), filter::ProvenanceMismatch);
  CHECK_THROWS(filter::filter_action(s, nets, zc, threshold(-0.8), 1.3));
  CHECK(filter::monitor(s, nets, zc) == filter::monitor(s, nets, zc));

  const auto before = s.latent();
  filter::filter_action(s, nets, zc, threshold(-0.8), 0.2);
  CHECK((s.latent() - before).norm() == 0.0f);
  const auto d = filter::filtered_step(s, nets, zc, threshold(-0.8), 0.2);
  CHECK((s.latent() - enc->encode(sim::step({0.2, 0.1, 0.4}, d.executed_action, sim::DubinsParams{}))).norm() == 0.0f);
}

TEST_CASE("the input hook only sees latents") {
  const auto enc = std::make_shared<const latent::Encoder>();
  const latent::LatentSession s(enc, sim::DubinsParams{}, {0, 0, 0});
  int calls = 0;
  filter::FilterInputHook hook = [&](const filter::FilterInputs& in) {
    ++calls;
    REQUIRE(in.current);
    REQUIRE(in.lookahead);
    REQUIRE(in.constraint);
    CHECK(in.current->size() == 16);
    CHECK(in.lookahead->size() == 16);
  };
  filter::filter_action(s, constant_nets(0.0, 0.0), enc->encode({1, 0, 0}), threshold(-0.9), 0.0, 0, &hook);
  CHECK(calls == 1);
}
