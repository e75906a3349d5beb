#include "sdmm/delay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

#include <boost/multiprecision/cpp_int.hpp>

#include "sdmm/quadrature.hpp"

namespace sdmm {

namespace {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

void check_system(std::size_t n, std::size_t k) {
  if (k < 2) throw std::invalid_argument("k must be at least 2");
  if (n < k) throw std::invalid_argument("n must be at least k");
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("lambda must be positive and finite");
  }
}

// Relative slack used to treat floating-point values as ties.
constexpr double kTieRel = 1e-12;

bool strictly_less(double a, double b) { return a < b - kTieRel * std::abs(b); }

cpp_int binomial(unsigned n, unsigned r) {
  if (r > n) return 0;
  cpp_int c = 1;
  for (unsigned i = 1; i <= r; ++i) {
    c *= n - r + i;
    c /= i;
  }
  return c;
}

}  // namespace

void DelayModel::validate() const {
  check_lambda(lambda);
  if (!(shift >= 0.0) || !std::isfinite(shift)) {
    throw std::invalid_argument("shift must be nonnegative and finite");
  }
}

WaitingSample waiting_times(std::span<const double> times, std::size_t k) {
  const std::size_t n = times.size();
  check_system(n, k);
  WaitingSample s;
  s.times.assign(times.begin(), times.end());
  s.sorted = s.times;
  std::sort(s.sorted.begin(), s.sorted.end());
  s.t_ss = s.sorted[k - 1];
  s.t_sc = std::numeric_limits<double>::infinity();
  s.sc_d = k;
  for (std::size_t d = k; d <= n; ++d) {
    const double v = (static_cast<double>(k - 1) / static_cast<double>(d - 1)) * s.sorted[d - 1];
    if (v < s.t_sc) {
      s.t_sc = v;
      s.sc_d = d;
    }
  }
  return s;
}

WaitingSample sample_delays(std::size_t n, std::size_t k, const DelayModel& model,
                            std::mt19937_64& rng) {
  check_system(n, k);
  model.validate();
  std::exponential_distribution<double> exp(model.worker_rate(k));
  std::vector<double> t(n);
  for (auto& v : t) v = model.shift + exp(rng);
  return waiting_times(t, k);
}

double harmonic(std::size_t n) {
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double term = 1.0 / static_cast<double>(i);
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      comp += (sum - t) + term;
    } else {
      comp += (term - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

double order_statistic_mean(std::size_t d, std::size_t n, std::size_t k, double lambda) {
  check_system(n, k);
  check_lambda(lambda);
  if (d < 1 || d > n) throw std::out_of_range("order statistic index out of range");
  return (harmonic(n) - harmonic(n - d)) / (lambda * static_cast<double>(k - 1));
}

double mean_ss(std::size_t n, std::size_t k, double lambda) {
  return order_statistic_mean(k, n, k, lambda);
}

double upper_bound_term(std::size_t d, std::size_t n, double lambda) {
  if (d < 2 || d > n) throw std::out_of_range("d out of range");
  check_lambda(lambda);
  return (harmonic(n) - harmonic(n - d)) / (lambda * static_cast<double>(d - 1));
}

BoundValue upper_bound(std::size_t n, std::size_t k, double lambda) {
  check_system(n, k);
  BoundValue best{upper_bound_term(k, n, lambda), k};
  for (std::size_t d = k + 1; d <= n; ++d) {
    const double v = upper_bound_term(d, n, lambda);
    if (strictly_less(v, best.value)) best = {v, d};
  }
  return best;
}

double lower_bound_term(std::size_t d, std::size_t n, std::size_t k, double lambda) {
  check_system(n, k);
  check_lambda(lambda);
  if (d < k || d > n) throw std::out_of_range("d out of range");
  // The alternating inner sum over j collapses to
  //   sum_j C(i,j) (-1)^j / (c + j s) = i! s^i / prod_{j=0..i} (c + j s),
  // which keeps every term positive.
  const double nd = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const double s = 2.0 * (dd - 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double c = nd * (nd - 1.0) + dd * (dd - 1.0) - 2.0 * static_cast<double>(i) * (dd - 1.0);
    double term = 2.0 / c;
    for (std::size_t j = 1; j <= i; ++j) {
      const double jd = static_cast<double>(j);
      term *= (nd - jd + 1.0) * s / (c + jd * s);
    }
    total += term;
  }
  return total / lambda;
}

BoundValue lower_bound(std::size_t n, std::size_t k, double lambda) {
  check_system(n, k);
  BoundValue best{lower_bound_term(k, n, k, lambda), k};
  for (std::size_t d = k + 1; d <= n; ++d) {
    const double v = lower_bound_term(d, n, k, lambda);
    if (strictly_less(best.value, v)) best = {v, d};
  }
  return best;
}

double survival_lower(double t, std::size_t d, std::size_t n, std::size_t k, double lambda) {
  check_system(n, k);
  check_lambda(lambda);
  if (d < k || d > n) throw std::out_of_range("d out of range");
  if (!(t >= 0.0)) throw std::invalid_argument("t must be nonnegative");
  // Pr(T_(k) > t/alpha_d) as a binomial tail, times the spacing factor.
  const double rate = lambda * t * static_cast<double>(d - 1);
  const double log_q = -rate;                 // log Pr(T_i > t/alpha_d)
  const double log_p = std::log1p(-std::exp(-rate));  // log Pr(T_i <= t/alpha_d)
  double tail = std::exp(static_cast<double>(n) * log_q);
  if (rate > 0.0) {
    for (std::size_t i = 1; i < k; ++i) {
      const double log_binom = std::lgamma(static_cast<double>(n) + 1.0) -
                               std::lgamma(static_cast<double>(i) + 1.0) -
                               std::lgamma(static_cast<double>(n - i) + 1.0);
      tail += std::exp(log_binom + static_cast<double>(i) * log_p +
                       static_cast<double>(n - i) * log_q);
    }
  }
  const double gap = static_cast<double>((n - d) * (n - d + 1)) / 2.0;
  return tail * std::exp(-lambda * t * gap);
}

double exact_mean_one_parity(std::size_t k, double lambda) {
  if (k < 2) throw std::invalid_argument("k must be at least 2");
  check_lambda(lambda);
  // The alternating sum cancels catastrophically in floating point for any
  // sizeable k, so it is always summed exactly.
  cpp_rational sum = 0;
  const std::uint64_t K = k;
  for (std::uint64_t i = 2; i <= K + 1; ++i) {
    cpp_rational bracket = cpp_rational(cpp_int(i), cpp_int(K + (K - 1) * (i - 1))) -
                           cpp_rational(cpp_int(1), cpp_int(K * i));
    cpp_rational term =
        cpp_rational(binomial(static_cast<unsigned>(K + 1), static_cast<unsigned>(i))) * bracket;
    if (i % 2 == 1) term = -term;
    sum += term;
  }
  return static_cast<double>(sum) / lambda;
}

double exact_mean_two_parity(std::size_t k, double lambda) {
  if (k < 2) throw std::invalid_argument("k must be at least 2");
  check_lambda(lambda);
  cpp_rational sum = 0;
  const std::uint64_t K = k;
  for (std::uint64_t i = 2; i <= K + 2; ++i) {
    const cpp_int ii = cpp_int(i) * (i - 1);
    cpp_rational bracket = cpp_rational(cpp_int(i), cpp_int((K + 1) + K * (i - 1))) -
                           cpp_rational(cpp_int(1), cpp_int((K + 1) * i)) +
                           cpp_rational(ii, cpp_int(4 * (K + 1) + 2 * (K - 1) * (i - 2))) -
                           cpp_rational(ii, cpp_int((2 * K + 1) + (K - 1) * (i - 2)));
    cpp_rational term =
        cpp_rational(binomial(static_cast<unsigned>(K + 2), static_cast<unsigned>(i))) * bracket;
    if (i % 2 == 1) term = -term;
    sum += term;
  }
  return static_cast<double>(sum) / lambda;
}

std::optional<double> exact_mean(std::size_t n, std::size_t k, double lambda) {
  check_system(n, k);
  if (n == k + 1) return exact_mean_one_parity(k, lambda);
  if (n == k + 2) return exact_mean_two_parity(k, lambda);
  return std::nullopt;
}

double survival_tsc_quadrature(double t, std::size_t n, std::size_t k, double lambda,
                               double abs_tol) {
  check_system(n, k);
  check_lambda(lambda);
  if (n - k > 2) {
    throw std::invalid_argument("quadrature CDF supports n - k <= 2 only; use Monte Carlo");
  }
  if (!(t >= 0.0)) throw std::invalid_argument("t must be nonnegative");
  if (t == 0.0) return 1.0;  // T_SC > 0 almost surely
  if (n == k) {
    // Only d = k exists: T_SC = T_(n).
    const double p = -std::expm1(-lambda * static_cast<double>(k - 1) * t);
    return 1.0 - std::pow(p, static_cast<double>(n));
  }

  const double mu = lambda * static_cast<double>(k - 1);
  const double km1 = static_cast<double>(k - 1);
  auto threshold = [&](std::size_t i) { return t * static_cast<double>(i - 1) / km1; };
  auto cdf = [&](double y) { return -std::expm1(-mu * y); };
  auto density = [&](double y) { return mu * std::exp(-mu * y); };

  const double log_fact_km1 = std::lgamma(static_cast<double>(k));
  const double log_fact_n = std::lgamma(static_cast<double>(n) + 1.0);
  // The k-1 smallest order statistics integrate to F(y_k)^(k-1)/(k-1)!.
  auto innermost = [&](double y) {
    const double F = cdf(y);
    if (F <= 0.0) return 0.0;
    return std::exp(km1 * std::log(F) - log_fact_km1);
  };

  // Truncate the outermost variable at the 1 - 1e-12 quantile.
  const double y_max = -std::log(1e-12) / mu;
  const double top_lo = threshold(n);
  if (top_lo >= y_max) return 0.0;
  const double tol = abs_tol * std::exp(-log_fact_n);

  // level(i, upper) = int_{t_i}^{upper} dF(y_i) level(i-1, y_i), with level(k-1, y) = innermost(y).
  std::function<double(std::size_t, double)> level = [&](std::size_t i, double upper) -> double {
    const double lo = threshold(i);
    if (upper <= lo) return 0.0;
    if (i == k) {
      return integrate_adaptive([&](double y) { return density(y) * innermost(y); }, lo, upper,
                                tol);
    }
    return integrate_adaptive([&](double y) { return density(y) * level(i - 1, y); }, lo, upper,
                              tol);
  };
  const double inner = level(n, y_max);
  const double survival = std::exp(log_fact_n) * inner;
  return std::clamp(survival, 0.0, 1.0);
}

double mean_tsc_quadrature(std::size_t n, std::size_t k, double lambda, double abs_tol) {
  check_system(n, k);
  check_lambda(lambda);
  const double mu = lambda * static_cast<double>(k - 1);
  // T_SC <= T_(k) and Pr(T_(k) > t) <= n exp(-mu t).
  const double t_max = (std::log(static_cast<double>(n)) - std::log(1e-12)) / mu;
  return integrate_adaptive(
      [&](double t) { return survival_tsc_quadrature(t, n, k, lambda, abs_tol); }, 0.0, t_max,
      abs_tol * 10.0);
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

namespace {

struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  void merge(const Moments& o) {
    if (o.count == 0) return;
    const double total = static_cast<double>(count + o.count);
    const double delta = o.mean - mean;
    mean += delta * static_cast<double>(o.count) / total;
    m2 += o.m2 + delta * delta * static_cast<double>(count) * static_cast<double>(o.count) / total;
    count += o.count;
  }
  double ci95() const {
    if (count < 2) return 0.0;
    const double var = m2 / static_cast<double>(count - 1);
    return 1.959963984540054 * std::sqrt(var / static_cast<double>(count));
  }
};

template <class ChunkFn>
void run_chunks(std::size_t chunks, unsigned threads, ChunkFn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));
  if (threads <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t c = w; c < chunks; c += threads) fn(c);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

McEstimate mc_mean(std::size_t n, std::size_t k, const DelayModel& model, std::size_t reps,
                   std::uint64_t seed, unsigned threads) {
  check_system(n, k);
  model.validate();
  if (reps < 1) throw std::invalid_argument("replications must be at least 1");

  const std::size_t chunks = (reps + kMcChunk - 1) / kMcChunk;
  std::vector<Moments> sc(chunks), ss(chunks);
  run_chunks(chunks, threads, [&](std::size_t c) {
    auto rng = substream(seed, c);
    const std::size_t count = std::min(kMcChunk, reps - c * kMcChunk);
    std::exponential_distribution<double> exp(model.worker_rate(k));
    std::vector<double> t(n);
    const double km1 = static_cast<double>(k - 1);
    for (std::size_t r = 0; r < count; ++r) {
      for (auto& v : t) v = model.shift + exp(rng);
      std::sort(t.begin(), t.end());
      double best = t[k - 1];
      for (std::size_t d = k + 1; d <= n; ++d) {
        best = std::min(best, (km1 / static_cast<double>(d - 1)) * t[d - 1]);
      }
      sc[c].add(best);
      ss[c].add(t[k - 1]);
    }
  });

  Moments sc_all, ss_all;
  for (std::size_t c = 0; c < chunks; ++c) {
    sc_all.merge(sc[c]);
    ss_all.merge(ss[c]);
  }
  return {sc_all.mean, sc_all.ci95(), ss_all.mean, ss_all.ci95(), reps};
}

double cdf_tsc(double t, std::size_t n, std::size_t k, double lambda, const CdfOptions& opts) {
  check_system(n, k);
  check_lambda(lambda);
  if (!(t >= 0.0)) throw std::invalid_argument("t must be nonnegative");
  if (opts.method == CdfMethod::Quadrature) {
    return 1.0 - survival_tsc_quadrature(t, n, k, lambda, opts.abs_tol);
  }
  if (opts.reps < 1) throw std::invalid_argument("replications must be at least 1");
  const std::size_t chunks = (opts.reps + kMcChunk - 1) / kMcChunk;
  std::size_t hits = 0;
  const DelayModel model{lambda, 0.0};
  for (std::size_t c = 0; c < chunks; ++c) {
    auto rng = substream(opts.seed, c);
    const std::size_t count = std::min(kMcChunk, opts.reps - c * kMcChunk);
    for (std::size_t r = 0; r < count; ++r) {
      if (sample_delays(n, k, model, rng).t_sc <= t) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(opts.reps);
}

double approx_upper(std::size_t n, std::size_t k, double lambda) {
  check_system(n, k);
  check_lambda(lambda);
  const double nd = static_cast<double>(n);
  double best = std::log(nd + 1.0) / (lambda * (nd - 1.0));
  for (std::size_t d = k; d + 1 <= n; ++d) {
    const double v = std::log((nd + 1.0) / static_cast<double>(n - d)) /
                     (lambda * static_cast<double>(d - 1));
    best = std::min(best, v);
  }
  return best;
}

double fixed_rate_bound(std::size_t n, double rate, double c, double lambda) {
  check_lambda(lambda);
  if (!(rate > 0.0) || !(rate <= c) || !(c < 1.0)) {
    throw std::invalid_argument("need 0 < rate <= c < 1");
  }
  const double nc = static_cast<double>(n) * c;
  if (!(nc > 1.0)) throw std::invalid_argument("need n * c > 1");
  return std::log(1.0 / (1.0 - c)) / (lambda * (nc - 1.0));
}

double savings(double mean_ss_value, double mean_sc_value, SavingsMetric metric) {
  if (metric == SavingsMetric::NormalizedDiff) {
    return (mean_ss_value - mean_sc_value) / mean_ss_value;
  }
  return mean_ss_value / mean_sc_value - 1.0;
}

double savings(std::size_t n, std::size_t k, double lambda, SavingsMetric metric,
               SavingsSource source, std::size_t reps, std::uint64_t seed) {
  if (source == SavingsSource::Exact) {
    auto exact = exact_mean(n, k, lambda);
    if (!exact) throw std::invalid_argument("exact savings need n - k <= 2");
    return savings(mean_ss(n, k, lambda), *exact, metric);
  }
  // Both means from the same replications.
  const auto mc = mc_mean(n, k, DelayModel{lambda, 0.0}, reps, seed);
  return savings(mc.mean_ss, mc.mean_sc, metric);
}

double renyi_transform(std::span<const double> z, std::size_t n) {
  if (z.size() > n) throw std::invalid_argument("need d <= n");
  double sum = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) sum += z[j] / static_cast<double>(n - j);
  return sum;
}

BoundsReport bounds_report(std::size_t n, std::size_t k, const DelayModel& model,
                           std::size_t reps, std::uint64_t seed) {
  model.validate();
  if (model.shift != 0.0) {
    throw std::invalid_argument("closed-form bounds assume an unshifted exponential model");
  }
  BoundsReport r;
  r.n = n;
  r.k = k;
  r.lambda = model.lambda;
  r.upper = upper_bound(n, k, model.lambda);
  r.lower = lower_bound(n, k, model.lambda);
  r.mean_ss = mean_ss(n, k, model.lambda);
  r.exact = exact_mean(n, k, model.lambda);
  r.approx_upper = approx_upper(n, k, model.lambda);
  if (reps > 0) r.mc = mc_mean(n, k, model, reps, seed);
  return r;
}

}  // namespace sdmm
