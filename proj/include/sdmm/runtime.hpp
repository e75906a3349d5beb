#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sdmm/delay.hpp"
#include "sdmm/field.hpp"
#include "sdmm/staircase.hpp"

namespace sdmm {

enum class Scheme { Staircase, Ramp };

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);

// Everything the master and the collector need to agree on for one (n, k)
// system: field, scheme, evaluation points and, for Staircase, the layout.
class CodingSystem {
 public:
  CodingSystem(PrimeField field, std::size_t n, std::size_t k, Scheme scheme,
               std::vector<Element> points = {});

  const PrimeField& field() const { return field_; }
  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }
  Scheme scheme() const { return scheme_; }
  std::span<const Element> points() const { return points_; }

  // alpha for Staircase, 1 for ramp sharing.
  std::size_t subshares_per_worker() const;
  // Number of row blocks A is split into.
  std::size_t secret_blocks() const;
  // Subshares each worker of a d-set must deliver.
  std::size_t prefix_length(std::size_t d) const;

  const StaircaseParams& params() const;
  const StaircaseLayout& layout() const;

  std::optional<Decodability> decodable(std::span<const std::size_t> received) const;

 private:
  PrimeField field_;
  std::size_t n_;
  std::size_t k_;
  Scheme scheme_;
  std::vector<Element> points_;
  std::optional<StaircaseParams> params_;
  std::optional<StaircaseLayout> layout_;
};

struct Assignment {
  std::uint32_t worker;
  Scheme scheme;
  // Ramp shares are carried as a single subshare.
  StaircaseShare share;
};

struct Setup {
  std::vector<Assignment> assignments;
  std::size_t rows = 0;         // rows of A before padding
  std::size_t padded_rows = 0;
};

// Pads A, draws fresh uniform keys from `key_source` and encodes one share
// per worker. The keys are dropped on return.
Setup master_setup(const FieldMatrix& a, const CodingSystem& system, std::mt19937_64& key_source);

struct SubResult {
  std::uint32_t worker;
  std::uint32_t index;  // 1-based subshare index
  FieldMatrix product;
  double arrival = 0.0;
};

// Products subshare * x in subshare order; x is l x 1.
std::vector<SubResult> worker_compute(const PrimeField& f, const Assignment& assignment,
                                      const FieldMatrix& x);

// Tracks delivered prefixes and fires once some d-set can decode.
class Collector {
 public:
  explicit Collector(const CodingSystem& system);

  // Returns true once the results seen so far are decodable. Results that
  // arrive after that are ignored.
  bool accept(const SubResult& r);

  bool decodable() const { return decision_.has_value(); }
  const std::optional<Decodability>& decision() const { return decision_; }
  double decode_time() const { return decode_time_; }
  std::span<const std::size_t> received() const { return counts_; }

  // A x, truncated to `rows`. Reads only the chosen workers' prefixes.
  FieldMatrix decode(std::size_t rows) const;

 private:
  const CodingSystem& system_;
  std::vector<std::size_t> counts_;
  std::vector<std::vector<FieldMatrix>> products_;
  std::optional<Decodability> decision_;
  double decode_time_ = 0.0;
};

struct DecodeOutcome {
  FieldMatrix result;
  double time = 0.0;
  std::size_t d = 0;
  std::vector<std::uint32_t> workers;
};

// Feeds a time-ordered stream into a collector; throws InsufficientWorkers if
// the stream ends before anything is decodable.
DecodeOutcome collect_and_decode(std::span<const SubResult> stream, const CodingSystem& system,
                                 std::size_t rows);

// Master-side view of the workers, shared by the simulator and TCP.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void setup(const CodingSystem& system, std::span<const Assignment> assignments) = 0;
  virtual void query(const FieldMatrix& x, std::uint32_t request_id) = 0;
  // Next result in arrival order; empty when no worker has anything left.
  virtual std::optional<SubResult> next() = 0;
};

DecodeOutcome run_query(Transport& transport, const CodingSystem& system, const FieldMatrix& x,
                        std::size_t rows, std::uint32_t request_id = 1);

struct TraceEvent {
  double time;
  std::uint32_t worker;
  std::uint32_t index;
  bool operator==(const TraceEvent&) const = default;
};

// Deterministic virtual clock: worker i's j-th subshare lands at (j / alpha) T_i.
// Infinite T_i models an unresponsive worker.
class VirtualTransport : public Transport {
 public:
  explicit VirtualTransport(std::vector<double> worker_times);

  void setup(const CodingSystem& system, std::span<const Assignment> assignments) override;
  void query(const FieldMatrix& x, std::uint32_t request_id) override;
  std::optional<SubResult> next() override;

  const std::vector<TraceEvent>& trace() const { return trace_; }

 private:
  struct Pending {
    double time;
    std::uint32_t worker;
    std::uint32_t index;
    std::size_t slot;
    bool operator>(const Pending& o) const {
      if (time != o.time) return time > o.time;
      if (worker != o.worker) return worker > o.worker;
      return index > o.index;
    }
  };

  std::vector<double> times_;
  const PrimeField* field_ = nullptr;
  std::vector<Assignment> assignments_;
  std::vector<SubResult> results_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
  std::vector<TraceEvent> trace_;
};

struct SimulationOutcome {
  DecodeOutcome decoded;
  WaitingSample sample;  // closed-form waiting times for the same draws
  std::vector<TraceEvent> trace;
};

// Delays come from substream(seed, 0), keys from substream(seed, 1).
SimulationOutcome simulate_run(const FieldMatrix& a, const FieldMatrix& x,
                               const CodingSystem& system, const DelayModel& model,
                               std::uint64_t seed,
                               std::span<const std::uint32_t> unresponsive = {});

SimulationOutcome simulate_run(const FieldMatrix& a, const FieldMatrix& x,
                               const CodingSystem& system, std::vector<double> worker_times,
                               std::uint64_t seed);

FieldMatrix random_matrix(const PrimeField& f, std::size_t rows, std::size_t cols,
                          std::mt19937_64& rng);

}  // namespace sdmm
