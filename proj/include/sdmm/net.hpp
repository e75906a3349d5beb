#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sdmm/runtime.hpp"
#include "sdmm/wire.hpp"

namespace sdmm {

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

// "host:port"
Endpoint parse_endpoint(const std::string& s);

// Owning socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  void send_frame(const Message& m);
  // Blocks for one whole frame; empty on orderly shutdown.
  std::optional<Message> recv_frame();

 private:
  int fd_ = -1;
};

Socket connect_to(const Endpoint& ep, std::chrono::milliseconds retry_for);

struct WorkerOptions {
  Endpoint listen;
  Element field = kDefaultModulus;
  bool once = false;
  // Mean of an exponential pause before each subresult, 0 for none.
  double mean_delay_ms = 0.0;
  std::uint64_t seed = 1;
};

// Serves masters until `once` finishes a session. `on_listening` receives the
// bound port (useful with port 0).
void serve_worker(const WorkerOptions& opts, const std::function<void(std::uint16_t)>& on_listening);

// One TCP connection per worker; arrivals are multiplexed with poll(2) into a
// single ordered stream.
class TcpTransport : public Transport {
 public:
  explicit TcpTransport(const std::vector<Endpoint>& workers,
                        std::chrono::milliseconds connect_timeout = std::chrono::seconds(5));

  void setup(const CodingSystem& system, std::span<const Assignment> assignments) override;
  void query(const FieldMatrix& x, std::uint32_t request_id) override;
  std::optional<SubResult> next() override;

 private:
  std::vector<Socket> sockets_;
  std::vector<bool> open_;
  std::uint32_t request_id_ = 0;
  std::chrono::steady_clock::time_point started_;
};

}  // namespace sdmm
