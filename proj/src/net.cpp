#include "sdmm/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <random>
#include <thread>

namespace sdmm {

Endpoint parse_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size()) {
    throw std::invalid_argument("expected host:port, got '" + s + "'");
  }
  Endpoint ep;
  ep.host = s.substr(0, colon);
  const std::string port = s.substr(colon + 1);
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(port, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad port in '" + s + "'");
  }
  if (used != port.size() || v > 65535) throw std::invalid_argument("bad port in '" + s + "'");
  ep.port = static_cast<std::uint16_t>(v);
  return ep;
}

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

namespace {

[[noreturn]] void sys_fail(const std::string& what) {
  throw Error(what + ": " + std::strerror(errno));
}

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

// False on EOF before the first byte; throws on EOF mid-read.
bool read_all(int fd, std::uint8_t* data, std::size_t len) {
  std::size_t got = 0;
  while (got < len) {
    const ssize_t n = ::recv(fd, data + got, len - got, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("recv");
    }
    if (n == 0) {
      if (got == 0) return false;
      throw WireError("connection closed mid-frame");
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

sockaddr_in resolve(const Endpoint& ep) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || res == nullptr) {
    throw Error("cannot resolve '" + ep.host + "': " + ::gai_strerror(rc));
  }
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  ::freeaddrinfo(res);
  addr.sin_port = htons(ep.port);
  return addr;
}

}  // namespace

void Socket::send_frame(const Message& m) {
  const auto bytes = encode_frame(m);
  write_all(fd_, bytes.data(), bytes.size());
}

std::optional<Message> Socket::recv_frame() {
  std::vector<std::uint8_t> buf(kFrameHeader);
  if (!read_all(fd_, buf.data(), kFrameHeader)) return std::nullopt;
  const std::size_t total = *frame_size(buf);
  buf.resize(total);
  if (total > kFrameHeader && !read_all(fd_, buf.data() + kFrameHeader, total - kFrameHeader)) {
    throw WireError("connection closed mid-frame");
  }
  return decode_frame(buf);
}

Socket connect_to(const Endpoint& ep, std::chrono::milliseconds retry_for) {
  const sockaddr_in addr = resolve(ep);
  const auto deadline = std::chrono::steady_clock::now() + retry_for;
  while (true) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) sys_fail("socket");
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
      int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return s;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      sys_fail("connect to " + ep.host + ":" + std::to_string(ep.port));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

namespace {

void serve_session(Socket& conn, const WorkerOptions& opts, std::mt19937_64& rng) {
  const PrimeField field(opts.field);
  std::optional<Assignment> assignment;
  std::exponential_distribution<double> pause(opts.mean_delay_ms > 0 ? 1.0 / opts.mean_delay_ms
                                                                      : 1.0);
  while (auto msg = conn.recv_frame()) {
    if (auto* setup = std::get_if<SetupMessage>(&*msg)) {
      if (setup->q != field.modulus()) {
        conn.send_frame(ErrorMessage{static_cast<std::uint32_t>(ErrorCode::FieldMismatch)});
        continue;
      }
      assignment = Assignment{setup->share.worker, setup->scheme, std::move(setup->share)};
    } else if (auto* query = std::get_if<QueryMessage>(&*msg)) {
      if (!assignment) {
        conn.send_frame(ErrorMessage{static_cast<std::uint32_t>(ErrorCode::NotSetUp)});
        continue;
      }
      if (query->x.size() != assignment->share.subshares.front().cols()) {
        conn.send_frame(ErrorMessage{static_cast<std::uint32_t>(ErrorCode::DimensionMismatch)});
        continue;
      }
      std::vector<Element> xs = query->x;
      for (auto& e : xs) {
        if (!field.contains(e)) e = field.reduce(e);
      }
      const FieldMatrix x = FieldMatrix::column(std::move(xs));
      // Stream subresults top to bottom, as each one finishes.
      for (std::size_t t = 0; t < assignment->share.subshares.size(); ++t) {
        if (opts.mean_delay_ms > 0) {
          std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(pause(rng)));
        }
        const FieldMatrix product = mat_mul(field, assignment->share.subshares[t], x);
        conn.send_frame(SubResultMessage{assignment->worker, static_cast<std::uint32_t>(t + 1),
                                         query->request_id,
                                         {product.entries().begin(), product.entries().end()}});
      }
    } else {
      conn.send_frame(ErrorMessage{static_cast<std::uint32_t>(ErrorCode::Malformed)});
    }
  }
}

}  // namespace

void serve_worker(const WorkerOptions& opts, const std::function<void(std::uint16_t)>& on_listening) {
  Socket listener(::socket(AF_INET, SOCK_STREAM, 0));
  if (!listener.valid()) sys_fail("socket");
  int one = 1;
  ::setsockopt(listener.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = resolve(opts.listen);
  if (::bind(listener.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    sys_fail("bind");
  }
  if (::listen(listener.fd(), 8) != 0) sys_fail("listen");
  socklen_t len = sizeof(addr);
  ::getsockname(listener.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_listening) on_listening(ntohs(addr.sin_port));

  std::mt19937_64 rng(opts.seed);
  do {
    Socket conn(::accept(listener.fd(), nullptr, nullptr));
    if (!conn.valid()) {
      if (errno == EINTR) continue;
      sys_fail("accept");
    }
    int nd = 1;
    ::setsockopt(conn.fd(), IPPROTO_TCP, TCP_NODELAY, &nd, sizeof(nd));
    try {
      serve_session(conn, opts, rng);
    } catch (const WireError&) {
      try {
        conn.send_frame(ErrorMessage{static_cast<std::uint32_t>(ErrorCode::Malformed)});
      } catch (const Error&) {
      }
    } catch (const Error&) {
      // Peer reset or vanished; a master that decoded early just hangs up.
    }
  } while (!opts.once);
}

TcpTransport::TcpTransport(const std::vector<Endpoint>& workers,
                           std::chrono::milliseconds connect_timeout) {
  for (const auto& ep : workers) {
    sockets_.push_back(connect_to(ep, connect_timeout));
    open_.push_back(true);
  }
}

void TcpTransport::setup(const CodingSystem& system, std::span<const Assignment> assignments) {
  if (assignments.size() != sockets_.size()) {
    throw std::invalid_argument("need one worker address per assignment");
  }
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    sockets_[i].send_frame(SetupMessage{assignments[i].scheme, static_cast<std::uint32_t>(system.n()),
                                        static_cast<std::uint32_t>(system.k()),
                                        system.field().modulus(), assignments[i].share});
  }
}

void TcpTransport::query(const FieldMatrix& x, std::uint32_t request_id) {
  if (x.cols() != 1) throw DimensionMismatch("x must be a column vector");
  request_id_ = request_id;
  started_ = std::chrono::steady_clock::now();
  const std::vector<Element> xs(x.entries().begin(), x.entries().end());
  for (auto& s : sockets_) s.send_frame(QueryMessage{request_id, xs});
}

std::optional<SubResult> TcpTransport::next() {
  while (true) {
    std::vector<pollfd> fds;
    std::vector<std::size_t> which;
    for (std::size_t i = 0; i < sockets_.size(); ++i) {
      if (!open_[i]) continue;
      fds.push_back({sockets_[i].fd(), POLLIN, 0});
      which.push_back(i);
    }
    if (fds.empty()) return std::nullopt;
    if (::poll(fds.data(), fds.size(), -1) < 0) {
      if (errno == EINTR) continue;
      sys_fail("poll");
    }
    for (std::size_t j = 0; j < fds.size(); ++j) {
      if ((fds[j].revents & (POLLIN | POLLHUP | POLLERR)) == 0) continue;
      const std::size_t i = which[j];
      auto msg = sockets_[i].recv_frame();
      if (!msg) {
        open_[i] = false;
        continue;
      }
      if (auto* r = std::get_if<SubResultMessage>(&*msg)) {
        if (r->request_id != request_id_) continue;
        const double arrival =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
        return SubResult{r->worker, r->index, FieldMatrix::column(r->values), arrival};
      }
      if (auto* e = std::get_if<ErrorMessage>(&*msg)) {
        throw Error("worker " + std::to_string(i + 1) + " reported error code " +
                    std::to_string(e->code));
      }
      throw WireError("unexpected message from worker");
    }
  }
}

}  // namespace sdmm
