#include "sdmm/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdmm/ramp.hpp"

namespace sdmm {

std::string to_string(Scheme s) { return s == Scheme::Staircase ? "staircase" : "ramp"; }

Scheme parse_scheme(const std::string& s) {
  if (s == "staircase") return Scheme::Staircase;
  if (s == "ramp") return Scheme::Ramp;
  throw std::invalid_argument("unknown scheme '" + s + "' (expected staircase or ramp)");
}

CodingSystem::CodingSystem(PrimeField field, std::size_t n, std::size_t k, Scheme scheme,
                           std::vector<Element> points)
    : field_(field), n_(n), k_(k), scheme_(scheme), points_(std::move(points)) {
  if (k < 2 || n <= k) throw std::invalid_argument("need 2 <= k < n");
  if (field_.modulus() <= n) throw std::invalid_argument("field too small for n workers");
  if (points_.empty()) {
    points_ = scheme == Scheme::Staircase ? default_staircase_points(n) : default_ramp_points(n);
  }
  if (points_.size() != n) throw std::invalid_argument("need one evaluation point per worker");
  if (scheme == Scheme::Staircase) {
    params_.emplace(n, k);
    layout_.emplace(sc_layout(*params_));
  }
}

std::size_t CodingSystem::subshares_per_worker() const {
  return scheme_ == Scheme::Staircase ? params_->alpha() : 1;
}

std::size_t CodingSystem::secret_blocks() const {
  return (k_ - 1) * subshares_per_worker();
}

std::size_t CodingSystem::prefix_length(std::size_t d) const {
  if (scheme_ == Scheme::Staircase) return params_->beta(d);
  if (d != k_) throw std::out_of_range("ramp sharing decodes from exactly k workers");
  return 1;
}

const StaircaseParams& CodingSystem::params() const {
  if (!params_) throw std::logic_error("ramp systems have no staircase parameters");
  return *params_;
}

const StaircaseLayout& CodingSystem::layout() const {
  if (!layout_) throw std::logic_error("ramp systems have no staircase layout");
  return *layout_;
}

std::optional<Decodability> CodingSystem::decodable(std::span<const std::size_t> received) const {
  if (scheme_ == Scheme::Staircase) return sc_decodable(received, *params_);
  if (received.size() != n_) throw std::invalid_argument("need one count per worker");
  std::vector<std::uint32_t> workers;
  for (std::size_t i = 0; i < n_ && workers.size() < k_; ++i) {
    if (received[i] >= 1) workers.push_back(static_cast<std::uint32_t>(i + 1));
  }
  if (workers.size() < k_) return std::nullopt;
  return Decodability{k_, std::move(workers)};
}

FieldMatrix random_matrix(const PrimeField& f, std::size_t rows, std::size_t cols,
                          std::mt19937_64& rng) {
  std::uniform_int_distribution<Element> dist(0, f.modulus() - 1);
  FieldMatrix m(rows, cols);
  for (auto& e : m.entries()) e = dist(rng);
  return m;
}

Setup master_setup(const FieldMatrix& a, const CodingSystem& system, std::mt19937_64& key_source) {
  const PrimeField& f = system.field();
  for (Element e : a.entries()) {
    if (!f.contains(e)) throw std::invalid_argument("matrix entry not reduced modulo q");
  }
  auto blocks = split_rows(a, system.secret_blocks());
  const std::size_t block_rows = blocks.front().rows();

  Setup setup;
  setup.rows = a.rows();
  setup.padded_rows = block_rows * blocks.size();

  if (system.scheme() == Scheme::Staircase) {
    std::vector<FieldMatrix> keys;
    for (std::size_t i = 0; i < system.subshares_per_worker(); ++i) {
      keys.push_back(random_matrix(f, block_rows, a.cols(), key_source));
    }
    auto shares = sc_encode(f, blocks, keys, system.points(), system.layout());
    for (auto& s : shares) setup.assignments.push_back({s.worker, Scheme::Staircase, std::move(s)});
  } else {
    const FieldMatrix key = random_matrix(f, block_rows, a.cols(), key_source);
    auto shares = ss_encode(f, blocks, key, system.points());
    for (auto& s : shares) {
      setup.assignments.push_back(
          {s.worker, Scheme::Ramp, StaircaseShare{s.worker, s.point, {std::move(s.block)}}});
    }
  }
  return setup;
}

std::vector<SubResult> worker_compute(const PrimeField& f, const Assignment& assignment,
                                      const FieldMatrix& x) {
  if (x.cols() != 1) throw DimensionMismatch("x must be a column vector");
  std::vector<SubResult> out;
  out.reserve(assignment.share.subshares.size());
  std::uint32_t index = 1;
  for (const auto& sub : assignment.share.subshares) {
    out.push_back({assignment.worker, index++, mat_mul(f, sub, x), 0.0});
  }
  return out;
}

Collector::Collector(const CodingSystem& system)
    : system_(system), counts_(system.n(), 0), products_(system.n()) {}

bool Collector::accept(const SubResult& r) {
  if (decision_) return true;
  if (r.worker < 1 || r.worker > system_.n()) throw DecodeError("result from unknown worker");
  auto& count = counts_[r.worker - 1];
  if (r.index != count + 1) {
    throw DecodeError("worker " + std::to_string(r.worker) + " sent subshare " +
                      std::to_string(r.index) + " after " + std::to_string(count));
  }
  if (count >= system_.subshares_per_worker()) throw DecodeError("too many subresults");
  products_[r.worker - 1].push_back(r.product);
  ++count;
  decision_ = system_.decodable(counts_);
  if (decision_) decode_time_ = r.arrival;
  return decision_.has_value();
}

FieldMatrix Collector::decode(std::size_t rows) const {
  if (!decision_) throw InsufficientWorkers("not decodable yet");
  const PrimeField& f = system_.field();
  const std::size_t d = decision_->d;
  std::vector<FieldMatrix> blocks;
  if (system_.scheme() == Scheme::Staircase) {
    const std::size_t beta = system_.prefix_length(d);
    std::vector<WorkerPrefix> responses;
    for (auto w : decision_->workers) {
      const auto& got = products_[w - 1];
      responses.push_back({system_.points()[w - 1],
                           std::vector<FieldMatrix>(got.begin(), got.begin() +
                                                                     static_cast<std::ptrdiff_t>(beta))});
    }
    blocks = sc_decode(f, system_.params(), system_.layout(), responses, d);
  } else {
    std::vector<RampShare> shares;
    for (auto w : decision_->workers) {
      shares.push_back({w, system_.points()[w - 1], products_[w - 1].front()});
    }
    blocks = ss_decode(f, shares, system_.k());
  }
  return join_rows(blocks, rows);
}

DecodeOutcome collect_and_decode(std::span<const SubResult> stream, const CodingSystem& system,
                                 std::size_t rows) {
  Collector c(system);
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& r : stream) {
    if (r.arrival < last) throw std::invalid_argument("results must arrive in time order");
    last = r.arrival;
    if (c.accept(r)) {
      return {c.decode(rows), c.decode_time(), c.decision()->d, c.decision()->workers};
    }
  }
  throw InsufficientWorkers("stream ended before any " + std::to_string(system.k()) +
                            "-or-more worker set could decode");
}

DecodeOutcome run_query(Transport& transport, const CodingSystem& system, const FieldMatrix& x,
                        std::size_t rows, std::uint32_t request_id) {
  transport.query(x, request_id);
  Collector c(system);
  while (auto r = transport.next()) {
    if (c.accept(*r)) {
      return {c.decode(rows), c.decode_time(), c.decision()->d, c.decision()->workers};
    }
  }
  throw InsufficientWorkers("workers stopped responding before the result was decodable");
}

VirtualTransport::VirtualTransport(std::vector<double> worker_times)
    : times_(std::move(worker_times)) {}

void VirtualTransport::setup(const CodingSystem& system, std::span<const Assignment> assignments) {
  if (assignments.size() != times_.size()) {
    throw std::invalid_argument("need one completion time per worker");
  }
  field_ = &system.field();
  assignments_.assign(assignments.begin(), assignments.end());
}

void VirtualTransport::query(const FieldMatrix& x, std::uint32_t) {
  if (field_ == nullptr) throw std::logic_error("query before setup");
  results_.clear();
  trace_.clear();
  queue_ = {};
  for (std::size_t w = 0; w < assignments_.size(); ++w) {
    const double t = times_[w];
    if (std::isinf(t)) continue;
    const auto& a = assignments_[w];
    const double alpha = static_cast<double>(a.share.subshares.size());
    for (auto& r : worker_compute(*field_, a, x)) {
      r.arrival = (static_cast<double>(r.index) / alpha) * t;
      queue_.push({r.arrival, r.worker, r.index, results_.size()});
      results_.push_back(std::move(r));
    }
  }
}

std::optional<SubResult> VirtualTransport::next() {
  if (queue_.empty()) return std::nullopt;
  const Pending p = queue_.top();
  queue_.pop();
  trace_.push_back({p.time, p.worker, p.index});
  return results_[p.slot];
}

namespace {

SimulationOutcome simulate_with_times(const FieldMatrix& a, const FieldMatrix& x,
                                      const CodingSystem& system, std::vector<double> times,
                                      std::mt19937_64& keys) {
  const Setup setup = master_setup(a, system, keys);
  VirtualTransport transport(times);
  transport.setup(system, setup.assignments);
  SimulationOutcome out{run_query(transport, system, x, setup.rows), waiting_times(times, system.k()),
                        transport.trace()};
  return out;
}

}  // namespace

SimulationOutcome simulate_run(const FieldMatrix& a, const FieldMatrix& x,
                               const CodingSystem& system, const DelayModel& model,
                               std::uint64_t seed, std::span<const std::uint32_t> unresponsive) {
  auto delay_rng = substream(seed, 0);
  auto key_rng = substream(seed, 1);
  std::vector<double> times = sample_delays(system.n(), system.k(), model, delay_rng).times;
  for (auto w : unresponsive) {
    if (w < 1 || w > system.n()) throw std::out_of_range("unresponsive worker id out of range");
    times[w - 1] = std::numeric_limits<double>::infinity();
  }
  return simulate_with_times(a, x, system, std::move(times), key_rng);
}

SimulationOutcome simulate_run(const FieldMatrix& a, const FieldMatrix& x,
                               const CodingSystem& system, std::vector<double> worker_times,
                               std::uint64_t seed) {
  if (worker_times.size() != system.n()) {
    throw std::invalid_argument("need one completion time per worker");
  }
  auto key_rng = substream(seed, 1);
  return simulate_with_times(a, x, system, std::move(worker_times), key_rng);
}

}  // namespace sdmm
