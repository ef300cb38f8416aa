#include "transcript.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <stdexcept>

#include "json.hpp"
#include "lsf/common/rng.hpp"

namespace lsf::checks {

std::vector<std::string> make_transcript(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> out;
  out.push_back(R"({"type":"reset","seed":7})");
  const double eps_choices[] = {0.3, 0.4, 0.5};
  while (static_cast<int>(out.size()) < n) {
    const double r = uniform(rng, 0, 1);
    nlohmann::json m;
    if (r < 0.70) {
      m = {{"type", "action"}, {"omega", uniform(rng, -1.5, 1.5)}};
    } else if (r < 0.76) {
      m = {{"type", "set_constraint"}, {"x", uniform(rng, -1.2, 1.2)}, {"y", uniform(rng, -1.2, 1.2)}};
    } else if (r < 0.80) {
      m = {{"type", "set_alpha"}, {"alpha", uniform(rng, 0.001, 0.2)}};
    } else if (r < 0.84) {
      m = {{"type", "set_epsilon"}, {"epsilon", eps_choices[uniform_index(rng, 3)]}};
    } else if (r < 0.88) {
      m = {{"type", "heatmap"}, {"theta", uniform(rng, -3, 3)}, {"resolution", 1 + uniform_index(rng, 12)}};
    } else if (r < 0.93) {
      m = {{"type", "reset"}, {"seed", uniform_index(rng, 1000)}};
    } else if (r < 0.96) {
      out.push_back("{not json");
      continue;
    } else {
      m = {{"type", "warp"}};
    }
    out.push_back(m.dump());
  }
  return out;
}

std::vector<std::string> replay_over_tcp(int port, const std::vector<std::string>& lines) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("socket failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(fd);
    throw std::runtime_error("connect failed");
  }
  std::vector<std::string> responses;
  std::string buffer;
  char chunk[65536];
  for (const auto& line : lines) {
    const std::string msg = line + "\n";
    if (::send(fd, msg.data(), msg.size(), MSG_NOSIGNAL) != static_cast<ssize_t>(msg.size())) break;
    std::size_t pos;
    while ((pos = buffer.find('\n')) == std::string::npos) {
      const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
      if (n <= 0) {
        ::close(fd);
        return responses;
      }
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
    responses.push_back(buffer.substr(0, pos));
    buffer.erase(0, pos + 1);
  }
  ::close(fd);
  return responses;
}

}  // namespace lsf::checks
