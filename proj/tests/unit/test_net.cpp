#include <future>
#include <random>
#include <thread>

#include "doctest.h"
#include "sdmm/errors.hpp"
#include "sdmm/net.hpp"

using namespace sdmm;

namespace {

struct LocalWorkers {
  std::vector<std::thread> threads;
  std::vector<Endpoint> endpoints;

  LocalWorkers(std::size_t n, Element q, double delay_ms = 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      std::promise<std::uint16_t> port;
      auto fut = port.get_future();
      WorkerOptions o;
      o.listen = Endpoint{"127.0.0.1", 0};
      o.field = q;
      o.once = true;
      o.mean_delay_ms = delay_ms;
      o.seed = i + 1;
      threads.emplace_back([o, p = std::move(port)]() mutable {
        serve_worker(o, [&](std::uint16_t bound) { p.set_value(bound); });
      });
      endpoints.push_back({"127.0.0.1", fut.get()});
    }
  }
  ~LocalWorkers() {
    for (auto& t : threads) t.join();
  }
};

}  // namespace

TEST_CASE("endpoint parsing") {
  const auto ep = parse_endpoint("127.0.0.1:8080");
  CHECK(ep.host == "127.0.0.1");
  CHECK(ep.port == 8080);
  CHECK_THROWS(parse_endpoint("localhost"));
  CHECK_THROWS(parse_endpoint("host:99999"));
  CHECK_THROWS(parse_endpoint(":80"));
}

TEST_CASE("TCP and virtual transports decode the same product") {
  const PrimeField f;
  std::mt19937_64 rng(1);
  for (auto scheme : {Scheme::Staircase, Scheme::Ramp}) {
    const CodingSystem sys(f, 4, 2, scheme);
    const FieldMatrix a = random_matrix(f, 30, 5, rng);
    const FieldMatrix x = random_matrix(f, 5, 1, rng);
    const auto setup = master_setup(a, sys, rng);

    FieldMatrix over_tcp(1, 1);
    {
      LocalWorkers workers(4, f.modulus(), 0.2);
      TcpTransport tcp(workers.endpoints);
      tcp.setup(sys, setup.assignments);
      const auto out = run_query(tcp, sys, x, setup.rows, 7);
      over_tcp = out.result;
      CHECK(out.time >= 0.0);
    }
    VirtualTransport virt({1.0, 2.0, 3.0, 4.0});
    virt.setup(sys, setup.assignments);
    const auto local = run_query(virt, sys, x, setup.rows);
    CHECK(over_tcp == local.result);
    CHECK(over_tcp == mat_mul(f, a, x));
  }
}

TEST_CASE("worker reports a field mismatch") {
  const PrimeField f(101);
  const CodingSystem sys(f, 3, 2, Scheme::Staircase);
  std::mt19937_64 rng(2);
  const FieldMatrix a = random_matrix(f, 4, 2, rng);
  const auto setup = master_setup(a, sys, rng);
  LocalWorkers workers(3, 2147483647u);
  TcpTransport tcp(workers.endpoints);
  tcp.setup(sys, setup.assignments);
  CHECK_THROWS_AS(run_query(tcp, sys, random_matrix(f, 2, 1, rng), 4), Error);
}

TEST_CASE("transport needs one address per worker") {
  const PrimeField f;
  const CodingSystem sys(f, 3, 2, Scheme::Staircase);
  std::mt19937_64 rng(3);
  const auto setup = master_setup(random_matrix(f, 4, 2, rng), sys, rng);
  LocalWorkers workers(2, f.modulus());
  TcpTransport tcp(workers.endpoints);
  CHECK_THROWS(tcp.setup(sys, setup.assignments));
}
