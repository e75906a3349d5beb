#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace sdmm {

// Straggler model: the full task A x takes Exp(lambda) at one machine, so a
// worker holding 1/(k-1) of it finishes after shift + Exp((k-1) lambda).
struct DelayModel {
  double lambda = 1.0;
  double shift = 0.0;

  void validate() const;
  double worker_rate(std::size_t k) const { return static_cast<double>(k - 1) * lambda; }
};

struct WaitingSample {
  std::vector<double> times;   // per worker, T_1..T_n
  std::vector<double> sorted;  // order statistics
  double t_sc = 0.0;           // min_d (k-1)/(d-1) T_(d)
  double t_ss = 0.0;           // T_(k)
  std::size_t sc_d = 0;        // smallest d attaining t_sc
};

// Waiting times for given worker completion times (infinite entries allowed).
WaitingSample waiting_times(std::span<const double> times, std::size_t k);

WaitingSample sample_delays(std::size_t n, std::size_t k, const DelayModel& model,
                            std::mt19937_64& rng);

// H_n with Neumaier-compensated summation; H_0 = 0.
double harmonic(std::size_t n);

inline constexpr double kEulerGamma = 0.5772156649015329;

// E[T_(d)] for n iid workers of rate (k-1) lambda.
double order_statistic_mean(std::size_t d, std::size_t n, std::size_t k, double lambda);

double mean_ss(std::size_t n, std::size_t k, double lambda);

struct BoundValue {
  double value;
  std::size_t d;  // optimising d, smallest on ties
};

double upper_bound_term(std::size_t d, std::size_t n, double lambda);
BoundValue upper_bound(std::size_t n, std::size_t k, double lambda);

// Integral over t of survival_lower(t, d, ...).
double lower_bound_term(std::size_t d, std::size_t n, std::size_t k, double lambda);
BoundValue lower_bound(std::size_t n, std::size_t k, double lambda);

// Probability of a sufficient condition for T_SC > t built around a fixed d.
double survival_lower(double t, std::size_t d, std::size_t n, std::size_t k, double lambda);

// Exact E[T_SC] for (k+1, k) and (k+2, k) systems.
double exact_mean_one_parity(std::size_t k, double lambda);
double exact_mean_two_parity(std::size_t k, double lambda);
// Dispatches on n - k; empty when n - k > 2.
std::optional<double> exact_mean(std::size_t n, std::size_t k, double lambda);

enum class CdfMethod { Quadrature, MonteCarlo };

struct CdfOptions {
  CdfMethod method = CdfMethod::Quadrature;
  double abs_tol = 1e-8;
  std::size_t reps = 100'000;
  std::uint64_t seed = 1;
};

// F_{T_SC}(t). Quadrature is limited to n - k <= 2.
double cdf_tsc(double t, std::size_t n, std::size_t k, double lambda, const CdfOptions& opts = {});

// Pr(T_SC > t) by nested quadrature over the top n - k + 1 order statistics.
double survival_tsc_quadrature(double t, std::size_t n, std::size_t k, double lambda,
                               double abs_tol = 1e-8);

// E[T_SC] as the integral of the quadrature survival function.
double mean_tsc_quadrature(std::size_t n, std::size_t k, double lambda, double abs_tol = 1e-8);

struct McEstimate {
  double mean_sc = 0.0;
  double ci95_sc = 0.0;  // half-width
  double mean_ss = 0.0;
  double ci95_ss = 0.0;
  std::size_t reps = 0;
};

// Replications are split into fixed chunks, each with its own generator keyed
// by (seed, chunk); the result does not depend on `threads`.
McEstimate mc_mean(std::size_t n, std::size_t k, const DelayModel& model, std::size_t reps,
                   std::uint64_t seed, unsigned threads = 0);

inline constexpr std::size_t kMcChunk = 4096;
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index);

double approx_upper(std::size_t n, std::size_t k, double lambda);

double fixed_rate_bound(std::size_t n, double rate, double c, double lambda);

enum class SavingsMetric { NormalizedDiff, RatioMinusOne };
enum class SavingsSource { Exact, MonteCarlo };

double savings(double mean_ss_value, double mean_sc_value, SavingsMetric metric);
double savings(std::size_t n, std::size_t k, double lambda, SavingsMetric metric,
               SavingsSource source, std::size_t reps = 1'000'000, std::uint64_t seed = 1);

// sum_{j < d} z_j / (n - j): distributed as T_(d) when the z_j are iid with
// the worker distribution (d = z.size()).
double renyi_transform(std::span<const double> z, std::size_t n);

struct BoundsReport {
  std::size_t n = 0;
  std::size_t k = 0;
  double lambda = 1.0;
  BoundValue upper{};
  BoundValue lower{};
  double mean_ss = 0.0;
  std::optional<double> exact;
  std::optional<McEstimate> mc;
  double approx_upper = 0.0;
};

// Closed forms need shift == 0; mc is filled when reps > 0.
BoundsReport bounds_report(std::size_t n, std::size_t k, const DelayModel& model,
                           std::size_t reps = 0, std::uint64_t seed = 1);

}  // namespace sdmm
