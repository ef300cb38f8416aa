#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "lsf/common/angles.hpp"
#include "lsf/sim/dataset.hpp"
#include "lsf/sim/dubins.hpp"

using namespace lsf;
using sim::PrivilegedState;

TEST_CASE("dubins step: straight, axis-aligned and full-rate turn") {
  const sim::DubinsParams p;
  auto s = sim::step({0, 0, 0}, 0.0, p);
  CHECK(s.x == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(s.y == doctest::Approx(0.0));
  CHECK(s.theta == 0.0);
  s = sim::step({0, 0, kPi / 2}, 0.0, p);
  CHECK(std::abs(s.x) < 1e-15);
  CHECK(s.y == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(s.theta == doctest::Approx(kPi / 2));
  s = sim::step({0, 0, 0}, 1.25, p);
  CHECK(s.x == doctest::Approx(0.05));
  CHECK(s.theta == doctest::Approx(0.0625).epsilon(1e-15));
}

TEST_CASE("dubins step rejects out-of-range actions and wraps heading") {
  const sim::DubinsParams p;
  CHECK_THROWS_AS(sim::step({0, 0, 0}, 1.2500001, p), std::invalid_argument);
  CHECK_THROWS_AS(sim::step({0, 0, 0}, -2.0, p), std::invalid_argument);
  const auto s = sim::step({0, 0, kPi - 0.01}, 1.25, p);
  CHECK(s.theta >= -kPi);
  CHECK(s.theta < kPi);
  CHECK(s.theta == doctest::Approx(kPi - 0.01 + 0.0625 - 2 * kPi));
}

TEST_CASE("ground-truth similarity") {
  CHECK(sim::ground_truth_similarity({0.3, -0.2}, {0.3, -0.2}) == 1.0);
  CHECK(sim::ground_truth_similarity({0, 0}, {0.5, 0}) == doctest::Approx(1.0 - 0.25 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(sim::ground_truth_similarity({0, 0}, {0.5, 0}) == doctest::Approx(0.8232233).epsilon(1e-7));
  CHECK(sim::ground_truth_similarity({0, 0}, {2, 0}) == -1.0);
}

TEST_CASE("signed distance margin") {
  const sim::FailureDisc d{0.2, -0.1, 0.5};
  CHECK(sim::signed_distance_margin({0.2, -0.1, 1.0}, d) == doctest::Approx(-0.5));
  CHECK(sim::signed_distance_margin({0.7, -0.1, 0.0}, d) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sim::signed_distance_margin({0.2, 0.9, -2.0}, d) == doctest::Approx(0.5));
}

TEST_CASE("episodes are deterministic and stop when leaving the box") {
  const sim::DubinsParams p;
  const auto a = sim::generate_dataset(1, p, 42);
  const auto b = sim::generate_dataset(1, p, 42);
  REQUIRE(a.size() == 1);
  REQUIRE(a[0].states.size() == b[0].states.size());
  for (std::size_t i = 0; i < a[0].states.size(); ++i) {
    CHECK(a[0].states[i].x == b[0].states[i].x);
    CHECK(a[0].states[i].theta == b[0].states[i].theta);
  }
  const auto many = sim::generate_dataset(300, p, 7);
  std::size_t total = 0;
  for (const auto& t : many) {
    CHECK(t.states.size() == t.actions.size() + 1);
    CHECK(t.step_count() <= static_cast<std::size_t>(p.horizon));
    for (std::size_t i = 0; i + 1 < t.states.size(); ++i) CHECK(sim::in_bounds(t.states[i], p));
    if (t.terminated_out_of_bounds) CHECK_FALSE(sim::in_bounds(t.states.back(), p));
    for (double a : t.actions) CHECK(std::abs(a) <= p.a_max);
    total += t.step_count();
  }
  CHECK(total <= 300u * 100u);
}

TEST_CASE("dataset file round trip") {
  const auto data = sim::generate_dataset(20, sim::DubinsParams{}, 3);
  const auto path = (std::filesystem::temp_directory_path() / "lsf_test_dataset.asd").string();
  sim::write_dataset(path, data);
  const auto back = sim::read_dataset(path);
  REQUIRE(back.size() == data.size());
  for (std::size_t e = 0; e < data.size(); ++e) {
    REQUIRE(back[e].states.size() == data[e].states.size());
    CHECK(back[e].terminated_out_of_bounds == data[e].terminated_out_of_bounds);
    for (std::size_t i = 0; i < data[e].states.size(); ++i) {
      CHECK(back[e].states[i].x == static_cast<float>(data[e].states[i].x));
      CHECK(back[e].states[i].theta == static_cast<float>(data[e].states[i].theta));
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("state index covers every stored state") {
  const auto data = sim::generate_dataset(5, sim::DubinsParams{}, 9);
  const sim::StateIndex idx(data);
  std::size_t n = 0;
  for (const auto& t : data) n += t.states.size();
  REQUIRE(idx.size() == n);
  CHECK(idx.at(0).x == data[0].states[0].x);
  CHECK(idx.at(n - 1).y == data.back().states.back().y);
}
