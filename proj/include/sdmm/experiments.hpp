#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sdmm/field.hpp"
#include "sdmm/runtime.hpp"

namespace sdmm {

// One experiment: a single (n, k) system, a fixed-rate family over n, or a
// fixed-parity family over k. Exactly one of the three must be given.
struct ExperimentConfig {
  enum class Mode { System, FixedRate, FixedParity };

  std::optional<std::size_t> n;
  std::optional<std::size_t> k;
  std::optional<double> rate;
  std::vector<std::size_t> n_list;
  std::optional<std::size_t> parity;
  std::vector<std::size_t> k_list;

  double lambda = 1.0;
  std::size_t reps = 1'000'000;
  std::uint64_t seed = 1;
  Element field = kDefaultModulus;
  std::vector<Scheme> schemes{Scheme::Staircase, Scheme::Ramp};
  std::string out;

  Mode mode() const;  // throws std::invalid_argument unless exactly one mode is set
};

// Flat "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> parse_flat_config(std::istream& in);
std::map<std::string, std::string> load_flat_config(const std::string& path);

// Copies config values into `cfg` for every key not listed in `explicit_keys`
// (those came from the command line and win). Unknown keys are an error.
void apply_config(const std::map<std::string, std::string>& values, ExperimentConfig& cfg,
                  const std::set<std::string>& explicit_keys = {});

std::vector<std::size_t> parse_size_list(const std::string& s);

struct ResultRow {
  std::size_t n = 0;
  std::size_t k = 0;
  double lambda = 1.0;
  double mean_sc_mc = 0.0;
  double ci95 = 0.0;
  double mean_ss_closed = 0.0;
  double upper = 0.0;
  double lower = 0.0;
  std::optional<double> exact;
  double savings_norm = 0.0;
  double savings_ratio = 0.0;
};

// Per-row generator seed, so a row does not depend on which sweep produced it.
std::uint64_t row_seed(std::uint64_t seed, std::size_t n, std::size_t k);

// Savings use the exact T_SC mean when available, the Monte Carlo one otherwise.
ResultRow make_row(std::size_t n, std::size_t k, double lambda, std::size_t reps,
                   std::uint64_t seed);

std::vector<ResultRow> run_parity_sweep(std::size_t parity, const std::vector<std::size_t>& ks,
                                        double lambda, std::size_t reps, std::uint64_t seed);
std::vector<ResultRow> run_two_parity_sweep(const std::vector<std::size_t>& ks, double lambda,
                                            std::size_t reps, std::uint64_t seed);
std::vector<ResultRow> run_fixed_rate_sweep(double rate, const std::vector<std::size_t>& ns,
                                            double lambda, std::size_t reps, std::uint64_t seed);

inline const std::vector<std::size_t> kFigureTwoK{2, 4, 6, 8, 10, 12, 14, 16, 18, 23, 28};
inline const std::vector<std::size_t> kFigureThreeN{8, 12, 24, 40, 80, 100, 120, 180, 200};

std::string csv_field(const std::string& s);
std::string format_number(double v);
std::string to_csv(const std::vector<ResultRow>& rows);
void emit_csv(const std::vector<ResultRow>& rows, const std::string& path);

struct SelftestOptions {
  std::size_t min_n = 3;
  std::size_t max_n = 6;
  Element field = 7;
  std::size_t sandwich_max_k = 4;
  std::size_t sandwich_reps = 20'000;
  std::size_t equivalence_seeds = 1'000;
  std::uint64_t seed = 1;
  // Zeroes one fresh key in every layout under test.
  bool inject_layout_mutation = false;
};

struct SelftestCheck {
  std::string module;
  std::string invariant;
  bool passed = true;
  std::string detail;
};

struct SelftestReport {
  std::vector<SelftestCheck> checks;
  std::vector<std::string> warnings;
  bool passed() const;
};

SelftestReport selftest(const SelftestOptions& opts);

}  // namespace sdmm
