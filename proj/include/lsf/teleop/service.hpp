#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "lsf/conformal/calibration.hpp"
#include "lsf/filter/runtime_filter.hpp"
#include "lsf/grid/value_grid.hpp"
#include "lsf/hjrl/filter_nets.hpp"

namespace lsf::teleop {

// Immutable resources shared by every session.
struct ServiceResources {
  latent::EncoderPtr encoder;
  std::shared_ptr<const hjrl::FilterNets> nets;
  std::shared_ptr<const conformal::CalibrationCache> calibration;
  std::shared_ptr<const grid::ValueGrid> oracle;  // optional, solved at the origin
  sim::DubinsParams params;
  double initial_alpha = 0.005;
  double initial_epsilon = 0.5;
  double runtime_margin = 0.1;

  // Throws if the calibration cache and filter disagree on the projector or
  // the initial ε is not cached.
  void validate() const;
};

inline constexpr std::size_t kEventLogCapacity = 10000;
inline constexpr int kMaxHeatmapResolution = 101;

struct LoggedDecision {
  std::uint64_t tick = 0;
  filter::FilterDecision decision;
};

// One client's sandbox. Not thread-safe: the server serializes requests per
// connection.
class TeleopSession {
 public:
  explicit TeleopSession(std::shared_ptr<const ServiceResources> res);

  // One request line in, one response line out (no trailing newline).
  std::string handle_line(const std::string& line);
  nlohmann::ordered_json handle(const nlohmann::json& msg);

  nlohmann::ordered_json handle_reset(std::uint64_t seed, const std::optional<sim::PrivilegedState>& start);
  nlohmann::ordered_json handle_set_constraint(double x, double y);
  nlohmann::ordered_json handle_action(double omega);
  nlohmann::ordered_json handle_set_alpha(double alpha);
  nlohmann::ordered_json handle_set_epsilon(double epsilon);
  nlohmann::ordered_json handle_heatmap(double theta, int resolution);

  const std::deque<LoggedDecision>& event_log() const { return events_; }
  std::uint64_t tick() const { return tick_; }
  const conformal::Threshold& threshold() const { return threshold_; }
  std::size_t audited_filter_calls() const { return audited_; }
  bool has_session() const { return session_.has_value(); }

 private:
  nlohmann::ordered_json state_message(double value, bool intervened, double omega, double task_omega,
                                       const std::string& notice) const;
  sim::PrivilegedState sample_start(std::uint64_t seed) const;

  std::shared_ptr<const ServiceResources> res_;
  std::optional<latent::LatentSession> session_;
  double cx_ = 0.0;
  double cy_ = 0.0;
  latent::LatentVec z_c_;
  double alpha_;
  double epsilon_;
  conformal::Threshold threshold_;
  std::uint64_t tick_ = 0;
  std::deque<LoggedDecision> events_;
  std::size_t audited_ = 0;
  filter::FilterInputHook audit_hook_;
};

// Newline-delimited JSON over TCP, one session per connection.
class TeleopServer {
 public:
  explicit TeleopServer(std::shared_ptr<const ServiceResources> res);
  ~TeleopServer();

  // Binds and starts accepting; port 0 picks a free port. Returns the port.
  int start(int port, const std::string& host = "127.0.0.1");
  void stop();
  // Blocks until stop() is called from another thread or a signal.
  void wait();

 private:
  void accept_loop();
  void serve_connection(int fd);

  std::shared_ptr<const ServiceResources> res_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mutex_;
  std::vector<std::thread> workers_;
  std::vector<int> client_fds_;
};

}  // namespace lsf::teleop
