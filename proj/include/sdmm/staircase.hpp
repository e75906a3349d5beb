#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdmm/field.hpp"

namespace sdmm {

struct Fraction {
  std::size_t num;
  std::size_t den;
  bool operator==(const Fraction&) const = default;
};

// Dimensions of an (n, k) Staircase code with privacy against one worker.
//
// alpha = LCM{k, ..., n-1} subshares per worker. A decoder that hears from d
// workers reads the first beta(d) = alpha (k-1)/(d-1) subshares of each. The
// columns of the pre-code matrix are grouped by height d; group d spans
// columns (beta(d+1), beta(d)] and has width(d) = beta(d) - beta(d+1).
class StaircaseParams {
 public:
  StaircaseParams(std::size_t n, std::size_t k);

  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }
  std::size_t alpha() const { return alpha_; }
  std::size_t secret_count() const { return (k_ - 1) * alpha_; }

  // d in [k, n]; beta(n + 1) is 0.
  std::size_t beta(std::size_t d) const;
  std::size_t width(std::size_t d) const;
  Fraction fraction(std::size_t d) const;

  // Height of 1-based column t.
  std::size_t column_height(std::size_t t) const;

 private:
  std::size_t n_;
  std::size_t k_;
  std::size_t alpha_;
  std::vector<std::size_t> beta_;  // indexed by d, size n + 2
};

// Upper limit on alpha accepted by sc_params; LCM{k..n-1} explodes quickly.
inline constexpr std::size_t kMaxAlpha = std::size_t{1} << 20;

StaircaseParams sc_params(std::size_t n, std::size_t k);

enum class CellKind { Zero, Secret, FreshKey, Copy };

// Rows and columns are 1-based throughout the layout API.
struct Cell {
  CellKind kind = CellKind::Zero;
  std::size_t index = 0;  // Secret / FreshKey index
  std::size_t src_row = 0;
  std::size_t src_col = 0;

  static Cell zero() { return {}; }
  static Cell secret(std::size_t i) { return {CellKind::Secret, i, 0, 0}; }
  static Cell fresh_key(std::size_t i) { return {CellKind::FreshKey, i, 0, 0}; }
  static Cell copy(std::size_t row, std::size_t col) { return {CellKind::Copy, 0, row, col}; }

  bool operator==(const Cell&) const = default;
};

std::string to_string(const Cell& c);

class StaircaseLayout {
 public:
  StaircaseLayout(std::size_t n, std::size_t alpha);

  std::size_t rows() const { return n_; }
  std::size_t cols() const { return alpha_; }

  const Cell& at(std::size_t row, std::size_t col) const;
  void set(std::size_t row, std::size_t col, Cell c);

  std::size_t height(std::size_t col) const;
  void set_height(std::size_t col, std::size_t h);

 private:
  std::size_t n_;
  std::size_t alpha_;
  std::vector<Cell> cells_;
  std::vector<std::size_t> heights_;
};

StaircaseLayout sc_layout(const StaircaseParams& p);

struct StaircaseShare {
  std::uint32_t worker;  // 1-based
  Element point;
  std::vector<FieldMatrix> subshares;
};

// x_i = i. Zero is never used: fresh keys need a nonzero coefficient.
std::vector<Element> default_staircase_points(std::size_t n);

std::vector<StaircaseShare> sc_encode(const PrimeField& f, std::span<const FieldMatrix> secrets,
                                      std::span<const FieldMatrix> keys,
                                      std::span<const Element> points,
                                      const StaircaseLayout& layout);

std::size_t sc_read_plan(const StaircaseParams& p, std::size_t d);

// The first beta(d) subshares (or subshare products) of one worker.
struct WorkerPrefix {
  Element point;
  std::vector<FieldMatrix> subshares;
};

// Recovers the secret blocks, ordered by secret index, from d workers.
std::vector<FieldMatrix> sc_decode(const PrimeField& f, const StaircaseParams& p,
                                   const StaircaseLayout& layout,
                                   std::span<const WorkerPrefix> responses, std::size_t d);

struct Decodability {
  std::size_t d;
  std::vector<std::uint32_t> workers;  // 1-based ids, ascending
  bool operator==(const Decodability&) const = default;
};

// received[i] is the number of leading subshares delivered by worker i + 1.
// Among feasible d, picks the one that reads the fewest symbols in total
// (d * beta(d), which means the largest feasible d).
std::optional<Decodability> sc_decodable(std::span<const std::size_t> received,
                                         const StaircaseParams& p);

struct Violation {
  std::string invariant;
  std::string detail;
};

std::vector<Violation> sc_verify(const StaircaseLayout& layout, const StaircaseParams& p);

struct PrivacyAuditOptions {
  // Refuse when (#secrets) * (#key tuples) exceeds this.
  std::uint64_t max_enumeration = 10'000'000;
  // Candidate secret vectors ((k-1) alpha symbols each). Empty means all of them.
  std::vector<std::vector<Element>> candidates;
};

struct PrivacyReport {
  std::vector<double> worker_tv;  // max pairwise TV distance per worker
  double max_tv = 0.0;
  std::size_t secrets_checked = 0;
};

// Exhaustive single-symbol privacy check: for each worker, the distribution of
// its share over uniform keys must not depend on the secret.
PrivacyReport privacy_audit(const PrimeField& f, const StaircaseParams& p,
                            const StaircaseLayout& layout, std::span<const Element> points,
                            const PrivacyAuditOptions& opts = {});

// Rank of the linear map keys -> one worker's alpha subshares (secrets fixed).
std::size_t key_share_rank(const PrimeField& f, const StaircaseLayout& layout,
                           std::span<const Element> points, std::uint32_t worker);

struct ShareHeader {
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  std::uint32_t alpha = 0;
  std::uint32_t q = 0;
  std::uint32_t worker = 0;
  std::uint32_t point = 0;
  std::uint32_t block_rows = 0;
  std::uint32_t cols = 0;
  bool operator==(const ShareHeader&) const = default;
};

struct SerializedShare {
  ShareHeader header;
  StaircaseShare share;
};

// Header as 8 big-endian u32 words, then alpha subshares in index order, each
// row-major with 4-byte big-endian entries.
std::vector<std::uint8_t> serialize_share(const StaircaseShare& s, std::size_t n, std::size_t k,
                                          Element q);
SerializedShare deserialize_share(std::span<const std::uint8_t> bytes);

}  // namespace sdmm
