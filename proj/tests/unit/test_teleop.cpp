#include <cmath>

#include "../support/transcript.hpp"
#include "doctest.h"
#include "json.hpp"
#include "lsf/teleop/service.hpp"

using namespace lsf;
using nlohmann::json;

namespace {

std::shared_ptr<const teleop::ServiceResources> resources() {
  static const auto res = [] {
    auto r = std::make_shared<teleop::ServiceResources>();
    r->encoder = std::make_shared<const latent::Encoder>();
    r->nets = std::make_shared<const hjrl::FilterNets>(
        hjrl::FilterNets::make(hjrl::Conditioning::zz, latent::MarginKind::raw, 16, {16, 16}, nullptr, 3));
    auto cache = std::make_shared<conformal::CalibrationCache>();
    cache->margin_kind = latent::MarginKind::raw;
    std::vector<double> scores;
    for (int i = 0; i < 3000; ++i) scores.push_back(-1.0 + 0.1 * i / 3000.0);
    for (double e : {0.3, 0.4, 0.5}) {
      std::vector<double> s = scores;
      for (auto& x : s) x += e;  // larger ε, larger δ
      cache->add(e, s);
    }
    r->calibration = cache;
    return std::shared_ptr<const teleop::ServiceResources>(r);
  }();
  return res;
}

json ask(teleop::TeleopSession& s, const std::string& line) { return json::parse(s.handle_line(line)); }

}  // namespace

TEST_CASE("action before reset is an error; malformed and unknown messages are errors") {
  teleop::TeleopSession s(resources());
  CHECK(ask(s, R"({"type":"action","omega":0.2})")["type"] == "error");
  CHECK(ask(s, "{oops")["type"] == "error");
  CHECK(ask(s, R"({"type":"teleport"})")["type"] == "error");
  CHECK(ask(s, R"({"omega":1})")["type"] == "error");
  CHECK(ask(s, R"({"type":"set_constraint","x":"a","y":0})")["type"] == "error");
}

TEST_CASE("reset is deterministic per seed and state messages carry the protocol fields") {
  teleop::TeleopSession a(resources()), b(resources());
  const auto ra = a.handle_line(R"({"type":"reset","seed":11})");
  CHECK(ra == b.handle_line(R"({"type":"reset","seed":11})"));
  const auto st = json::parse(ra);
  CHECK(st["type"] == "state");
  for (const char* k : {"x", "y", "theta", "value", "delta", "delta_effective", "intervened", "omega", "task_omega",
                        "tick", "constraint", "alpha", "epsilon"}) {
    CHECK(st.contains(k));
  }
  CHECK(st["tick"] == 0);
  const auto st2 = ask(a, R"({"type":"action","omega":0.3})");
  CHECK(st2["tick"] == 1);
  CHECK(st2["task_omega"] == 0.3);
  CHECK(a.event_log().size() == 1);
  CHECK(a.audited_filter_calls() == 1);
}

TEST_CASE("constraint echo, last writer wins, bounds check") {
  teleop::TeleopSession s(resources());
  ask(s, R"({"type":"reset","seed":1})");
  CHECK(ask(s, R"({"type":"set_constraint","x":0.2,"y":0.1})")["type"] == "ack");
  CHECK(ask(s, R"({"type":"set_constraint","x":-0.4,"y":0.7})")["type"] == "ack");
  const auto st = ask(s, R"({"type":"action","omega":0})");
  CHECK(st["constraint"]["x"] == -0.4);
  CHECK(st["constraint"]["y"] == 0.7);
  CHECK(ask(s, R"({"type":"set_constraint","x":2.0,"y":0})")["type"] == "error");
}

TEST_CASE("omega is clamped with a notice") {
  teleop::TeleopSession s(resources());
  ask(s, R"({"type":"reset","seed":1})");
  const auto st = ask(s, R"({"type":"action","omega":9.0})");
  CHECK(st["task_omega"] == 1.25);
  CHECK(st.contains("notice"));
}

TEST_CASE("alpha and epsilon updates follow the calibration cache") {
  teleop::TeleopSession s(resources());
  const auto a1 = ask(s, R"({"type":"set_alpha","alpha":0.05})");
  const auto a2 = ask(s, R"({"type":"set_alpha","alpha":0.01})");
  CHECK(a2["delta"].get<double>() >= a1["delta"].get<double>());
  CHECK(ask(s, R"({"type":"set_alpha","alpha":0.01})")["delta"] == a2["delta"]);
  CHECK(ask(s, R"({"type":"set_alpha","alpha":1.5})")["type"] == "error");
  const double d3 = ask(s, R"({"type":"set_epsilon","epsilon":0.3})")["delta"];
  const double d4 = ask(s, R"({"type":"set_epsilon","epsilon":0.4})")["delta"];
  const double d5 = ask(s, R"({"type":"set_epsilon","epsilon":0.5})")["delta"];
  CHECK(d3 <= d4);
  CHECK(d4 <= d5);
  CHECK(ask(s, R"({"type":"set_epsilon","epsilon":0.45})")["type"] == "error");
  // A tiny α pushes k past N: the sentinel is sent as null.
  const auto sentinel = ask(s, R"({"type":"set_alpha","alpha":0.0001})");
  CHECK(sentinel["delta"].is_null());
}

TEST_CASE("heatmap: payload shape, cap, determinism, center cell") {
  teleop::TeleopSession s(resources());
  const auto h = s.handle_line(R"({"type":"heatmap","theta":0.5,"resolution":7})");
  CHECK(h == s.handle_line(R"({"type":"heatmap","theta":0.5,"resolution":7})"));
  const auto j = json::parse(h);
  CHECK(j["type"] == "heatmap");
  CHECK(j["values"].size() == 49);
  CHECK(ask(s, R"({"type":"heatmap","theta":0,"resolution":102})")["type"] == "error");
  const auto one = ask(s, R"({"type":"heatmap","theta":0.25,"resolution":1})");
  REQUIRE(one["values"].size() == 1);
  const auto& res = *resources();
  const auto zc = latent::constraint_latent(*res.encoder, 0.0, 0.0);
  const double center = res.nets->value(res.encoder->encode({0.0, 0.0, 0.25}), zc);
  CHECK(one["values"][0].get<double>() == doctest::Approx(center).epsilon(1e-6));
}

TEST_CASE("event log is bounded") {
  teleop::TeleopSession s(resources());
  ask(s, R"({"type":"reset","seed":2})");
  for (std::size_t i = 0; i < teleop::kEventLogCapacity + 25; ++i) s.handle_line(R"({"type":"action","omega":0.0})");
  CHECK(s.event_log().size() == teleop::kEventLogCapacity);
  CHECK(s.event_log().front().tick == 26);
}

TEST_CASE("a recorded transcript replays byte-identically over TCP") {
  teleop::TeleopServer server(resources());
  const int port = server.start(0);
  const auto transcript = checks::make_transcript(500, 5);
  const auto first = checks::replay_over_tcp(port, transcript);
  const auto second = checks::replay_over_tcp(port, transcript);
  server.stop();
  REQUIRE(first.size() == transcript.size());
  CHECK(first == second);
  std::size_t states = 0;
  for (const auto& line : first) states += json::parse(line)["type"] == "state";
  CHECK(states > 300);
}
