#include <cmath>
#include <stdexcept>

#include "lsf/common/angles.hpp"
#include "lsf/common/kv_config.hpp"
#include "lsf/common/rng.hpp"
#include "lsf/grid/oracle.hpp"
#include "lsf/teleop/service.hpp"

namespace lsf::teleop {

using nlohmann::json;
using nlohmann::ordered_json;

void ServiceResources::validate() const {
  if (!encoder || !nets || !calibration) throw std::invalid_argument("teleop: encoder, nets and calibration are required");
  if (nets->projector_checksum != calibration->projector_checksum) {
    throw filter::ProvenanceMismatch("teleop: calibration cache and filter were built with different projectors");
  }
  if (!calibration->has(initial_epsilon)) {
    throw std::invalid_argument("teleop: no calibration scores for the initial epsilon");
  }
  if (oracle && oracle->margin && (std::abs(oracle->margin->cx) > 1e-9 || std::abs(oracle->margin->cy) > 1e-9)) {
    throw std::invalid_argument("teleop: oracle grid must be solved at the origin");
  }
}

namespace {

ordered_json error(const std::string& detail) {
  ordered_json j;
  j["type"] = "error";
  j["detail"] = detail;
  return j;
}

ordered_json delta_json(double delta) {
  // JSON has no infinity; the sentinel is sent as null.
  return std::isfinite(delta) ? ordered_json(delta) : ordered_json(nullptr);
}

bool is_latent(const latent::LatentVec* v, int dim) {
  if (!v || v->size() != dim) return false;
  for (Eigen::Index i = 0; i < v->size(); ++i) {
    if (!(std::abs((*v)(i)) < 1.0f)) return false;
  }
  return true;
}

}  // namespace

TeleopSession::TeleopSession(std::shared_ptr<const ServiceResources> res)
    : res_(std::move(res)), alpha_(res_->initial_alpha), epsilon_(res_->initial_epsilon) {
  res_->validate();
  threshold_ = res_->calibration->threshold(epsilon_, alpha_, res_->runtime_margin);
  z_c_ = latent::constraint_latent(*res_->encoder, cx_, cy_);
  const int dim = res_->encoder->latent_dim();
  audit_hook_ = [this, dim](const filter::FilterInputs& in) {
    if (!is_latent(in.current, dim) || !is_latent(in.lookahead, dim) || !is_latent(in.constraint, dim)) {
      throw std::logic_error("filter received a non-latent input");
    }
    ++audited_;
  };
}

std::string TeleopSession::handle_line(const std::string& line) {
  json msg;
  try {
    msg = json::parse(line);
  } catch (const std::exception& e) {
    return error(std::string("malformed JSON: ") + e.what()).dump();
  }
  return handle(msg).dump();
}

ordered_json TeleopSession::handle(const json& msg) {
  try {
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) return error("message needs a string 'type'");
    const std::string type = msg["type"];
    if (type == "reset") {
      std::optional<sim::PrivilegedState> start;
      if (msg.contains("start")) {
        const auto& s = msg["start"];
        start = sim::PrivilegedState{s.at("x").get<double>(), s.at("y").get<double>(),
                                     wrap_angle(s.value("theta", 0.0))};
      }
      return handle_reset(msg.value("seed", std::uint64_t{0}), start);
    }
    if (type == "set_constraint") return handle_set_constraint(msg.at("x").get<double>(), msg.at("y").get<double>());
    if (type == "action") return handle_action(msg.at("omega").get<double>());
    if (type == "set_alpha") return handle_set_alpha(msg.at("alpha").get<double>());
    if (type == "set_epsilon") return handle_set_epsilon(msg.at("epsilon").get<double>());
    if (type == "heatmap") return handle_heatmap(msg.value("theta", 0.0), msg.value("resolution", 41));
    return error("unknown message type: " + type);
  } catch (const json::exception& e) {
    return error(std::string("bad message: ") + e.what());
  } catch (const std::invalid_argument& e) {
    return error(e.what());
  }
}

sim::PrivilegedState TeleopSession::sample_start(std::uint64_t seed) const {
  Rng rng(seed);
  const double b = res_->params.bound;
  std::optional<grid::ShiftedOracle> oracle;
  if (res_->oracle) oracle.emplace(res_->oracle, sim::FailureDisc{cx_, cy_, epsilon_});
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const sim::PrivilegedState s{uniform(rng, -b, b), uniform(rng, -b, b), uniform(rng, -kPi, kPi)};
    if (oracle) {
      if (oracle->value(s) > 0.0) return s;
    } else if (std::hypot(s.x - cx_, s.y - cy_) > epsilon_ + 0.5) {
      return s;
    }
  }
  throw std::runtime_error("reset: no safe start found");
}

ordered_json TeleopSession::state_message(double value, bool intervened, double omega, double task_omega,
                                          const std::string& notice) const {
  const auto s = latent::privileged::hidden_state(*session_);
  ordered_json j;
  j["type"] = "state";
  j["x"] = s.x;
  j["y"] = s.y;
  j["theta"] = s.theta;
  j["value"] = value;
  j["delta_effective"] = delta_json(threshold_.effective());
  j["intervened"] = intervened;
  j["omega"] = omega;
  j["task_omega"] = task_omega;
  j["tick"] = tick_;
  j["constraint"] = {{"x", cx_}, {"y", cy_}};
  j["delta"] = delta_json(threshold_.delta);
  j["alpha"] = alpha_;
  j["epsilon"] = epsilon_;
  j["in_bounds"] = session_->in_bounds();
  if (!notice.empty()) j["notice"] = notice;
  return j;
}

ordered_json TeleopSession::handle_reset(std::uint64_t seed, const std::optional<sim::PrivilegedState>& start) {
  session_.emplace(res_->encoder, res_->params, start ? *start : sample_start(seed));
  tick_ = 0;
  events_.clear();
  const double v = filter::monitor(*session_, *res_->nets, z_c_);
  return state_message(v, !(v > threshold_.effective()), 0.0, 0.0, "");
}

ordered_json TeleopSession::handle_set_constraint(double x, double y) {
  const double b = res_->params.bound;
  if (!(std::abs(x) <= b && std::abs(y) <= b)) return error("constraint outside the environment bounds");
  cx_ = x;
  cy_ = y;
  z_c_ = latent::constraint_latent(*res_->encoder, x, y);
  ordered_json j;
  j["type"] = "ack";
  j["detail"] = "constraint set";
  j["constraint"] = {{"x", cx_}, {"y", cy_}};
  return j;
}

ordered_json TeleopSession::handle_action(double omega) {
  if (!session_) return error("no session; send reset first");
  if (!std::isfinite(omega)) return error("omega must be finite");
  std::string notice;
  const double a_max = res_->params.a_max;
  if (std::abs(omega) > a_max) {
    omega = std::clamp(omega, -a_max, a_max);
    notice = "omega clamped to [-a_max, a_max]";
  }
  const auto d = filter::filtered_step(*session_, *res_->nets, z_c_, threshold_, omega, 0, &audit_hook_);
  ++tick_;
  if (events_.size() == kEventLogCapacity) events_.pop_front();
  events_.push_back({tick_, d});
  return state_message(d.monitored_value, d.intervened, d.executed_action, d.task_action, notice);
}

ordered_json TeleopSession::handle_set_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) return error("alpha must lie in (0, 1)");
  threshold_ = res_->calibration->threshold(epsilon_, alpha, res_->runtime_margin);
  alpha_ = alpha;
  ordered_json j;
  j["type"] = "ack";
  j["detail"] = "alpha set";
  j["delta"] = delta_json(threshold_.delta);
  j["delta_effective"] = delta_json(threshold_.effective());
  return j;
}

ordered_json TeleopSession::handle_set_epsilon(double epsilon) {
  if (!res_->calibration->has(epsilon)) return error("no calibration cache for epsilon " + format_double(epsilon));
  threshold_ = res_->calibration->threshold(epsilon, alpha_, res_->runtime_margin);
  epsilon_ = epsilon;
  ordered_json j;
  j["type"] = "ack";
  j["detail"] = "epsilon set";
  j["delta"] = delta_json(threshold_.delta);
  j["delta_effective"] = delta_json(threshold_.effective());
  return j;
}

ordered_json TeleopSession::handle_heatmap(double theta, int resolution) {
  if (resolution < 1 || resolution > kMaxHeatmapResolution) {
    return error("resolution must be between 1 and " + std::to_string(kMaxHeatmapResolution));
  }
  const double b = res_->params.bound;
  const double cell = 2.0 * b / resolution;
  std::vector<sim::PrivilegedState> pts;
  pts.reserve(static_cast<std::size_t>(resolution) * resolution);
  for (int j = 0; j < resolution; ++j) {
    for (int i = 0; i < resolution; ++i) pts.push_back({-b + (i + 0.5) * cell, -b + (j + 0.5) * cell, theta});
  }
  const Eigen::VectorXd v = res_->nets->values_latent(res_->encoder->encode_batch(pts), z_c_);
  ordered_json j;
  j["type"] = "heatmap";
  j["theta"] = theta;
  j["resolution"] = resolution;
  j["values"] = std::vector<double>(v.data(), v.data() + v.size());
  j["delta"] = delta_json(threshold_.delta);
  j["delta_effective"] = delta_json(threshold_.effective());
  return j;
}

}  // namespace lsf::teleop
