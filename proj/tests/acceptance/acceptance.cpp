// One line per acceptance criterion; exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "sdmm/delay.hpp"
#include "sdmm/matrix_io.hpp"
#include "sdmm/quadrature.hpp"
#include "sdmm/runtime.hpp"
#include "sdmm/staircase.hpp"

using namespace sdmm;

namespace {

struct Outcome {
  bool ok;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out{false, ""};
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_s > 0 && secs > limit_s) {
    out.ok = false;
    out.detail += " (over the " + std::to_string(limit_s) + " s limit)";
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f s", secs);
  std::cout << (out.ok ? "PASS " : "FAIL ") << (id < 10 ? " " : "") << id << " " << name << " ["
            << buf << "] " << out.detail << std::endl;
  if (!out.ok) ++failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// (n, lower, upper) as plotted for (k+2, k) systems.
struct Plotted {
  std::size_t n;
  double lower;
  double upper;
};

const Plotted kTwoParity[] = {
    {4, 0.238095238095238, 0.541666666666667},   {6, 0.205688429217841, 0.316666666666667},
    {8, 0.180636776751595, 0.243571428571429},   {10, 0.161654656307091, 0.204138321995465},
    {12, 0.146807706614232, 0.178134519801186},  {14, 0.134844284363862, 0.159232938778393},
    {16, 0.125381932881933, 0.144671461017615},  {18, 0.11735929871743, 0.133007205213088},
    {20, 0.110407350375983, 0.123396450420217},  {25, 0.0964982574063961, 0.105270826261523},
    {30, 0.0860340389972549, 0.0924069307748293},
};

Outcome table_one() {
  const PrimeField f(5);
  const auto p = sc_params(3, 2);
  auto unit = [](std::size_t i) {
    FieldMatrix m(1, 4);
    m(0, i) = 1;
    return m;
  };
  // A1, A2, R1, R2 as unit vectors: each subshare is its coefficient vector.
  const std::vector<FieldMatrix> secrets{unit(0), unit(1)};
  const std::vector<FieldMatrix> keys{unit(2), unit(3)};
  const std::vector<Element> points{1, 2, 3};
  const auto shares = sc_encode(f, secrets, keys, points, sc_layout(p));
  const std::vector<std::vector<Element>> expected{
      {1, 1, 1, 0}, {0, 0, 1, 1}, {1, 2, 4, 0}, {0, 0, 1, 2}, {1, 3, 4, 0}, {0, 0, 1, 3}};
  std::size_t i = 0;
  for (const auto& s : shares) {
    if (s.subshares.size() != 2) return {false, "wrong subshare count"};
    for (const auto& sub : s.subshares) {
      const auto e = sub.entries();
      if (std::vector<Element>(e.begin(), e.end()) != expected[i]) {
        return {false, "subshare " + std::to_string(i + 1) + " differs"};
      }
      ++i;
    }
  }
  return {true, "6 subshares match"};
}

Outcome bound_regression() {
  double worst = 0;
  for (const auto& row : kTwoParity) {
    const std::size_t k = row.n - 2;
    worst = std::max(worst, std::abs(upper_bound(row.n, k, 1.0).value - row.upper));
    worst = std::max(worst, std::abs(lower_bound(row.n, k, 1.0).value - row.lower));
  }
  return {worst <= 5e-6, "max deviation " + fmt(worst)};
}

Outcome closed_forms() {
  const double a = std::abs(exact_mean_two_parity(2, 1.0) - 26.0 / 63);
  const double b = std::abs(exact_mean_one_parity(2, 1.0) - 2.0 / 3);
  const double c = std::abs(mean_ss(4, 2, 1.0) - 7.0 / 12);
  return {a <= 1e-12 && b <= 1e-12 && c <= 1e-12,
          "errors " + fmt(a) + ", " + fmt(b) + ", " + fmt(c)};
}

Outcome mc_vs_exact() {
  std::string detail;
  bool ok = true;
  for (auto [n, k, exact] : {std::tuple{4u, 2u, 26.0 / 63}, std::tuple{3u, 2u, 2.0 / 3}}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto m = mc_mean(n, k, DelayModel{1.0, 0.0}, 1'000'000, 2024);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double rel = std::abs(m.mean_sc - exact) / exact;
    ok = ok && rel <= 0.01 && secs < 10.0;
    detail += "(" + std::to_string(n) + "," + std::to_string(k) + ") rel err " + fmt(rel) + " in " +
              fmt(secs) + " s; ";
  }
  return {ok, detail};
}

Outcome fixed_rate_regression() {
  const auto m = mc_mean(8, 2, DelayModel{1.0, 0.0}, 1'000'000, 2024);
  const double sc_rel = std::abs(m.mean_sc - 0.152153) / 0.152153;
  const double ramp = harmonic(8) - harmonic(6);
  const double ss_rel = std::abs(m.mean_ss - ramp) / ramp;
  const double up = std::abs(upper_bound(8, 2, 1.0).value - 0.211508);
  return {sc_rel <= 0.02 && ss_rel <= 0.02 && up <= 5e-6,
          "staircase " + fmt(m.mean_sc) + ", ramp " + fmt(m.mean_ss) + ", upper err " + fmt(up)};
}

Outcome decode_universality() {
  const PrimeField f(7);
  std::mt19937_64 rng(6);
  std::size_t decodes = 0;
  for (std::size_t n = 3; n <= 6; ++n) {
    for (std::size_t k = 2; k < n; ++k) {
      const auto p = sc_params(n, k);
      const auto layout = sc_layout(p);
      std::vector<FieldMatrix> secrets, keys;
      for (std::size_t i = 0; i < p.secret_count(); ++i) secrets.push_back(random_matrix(f, 1, 1, rng));
      for (std::size_t i = 0; i < p.alpha(); ++i) keys.push_back(random_matrix(f, 1, 1, rng));
      const auto shares = sc_encode(f, secrets, keys, default_staircase_points(n), layout);
      for (std::size_t d = k; d <= n; ++d) {
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
          if (static_cast<std::size_t>(__builtin_popcount(mask)) != d) continue;
          std::vector<WorkerPrefix> resp;
          for (std::size_t i = 0; i < n; ++i) {
            if (!(mask & (1u << i))) continue;
            resp.push_back({shares[i].point,
                            {shares[i].subshares.begin(),
                             shares[i].subshares.begin() + static_cast<std::ptrdiff_t>(p.beta(d))}});
          }
          if (sc_decode(f, p, layout, resp, d) != secrets) {
            return {false, "(" + std::to_string(n) + "," + std::to_string(k) + ") d=" +
                               std::to_string(d) + " mask " + std::to_string(mask)};
          }
          ++decodes;
        }
      }
    }
  }
  return {true, std::to_string(decodes) + " subset decodes"};
}

Outcome privacy() {
  const PrimeField f5(5);
  const auto p = sc_params(3, 2);
  const std::vector<Element> pts{1, 2, 3};
  const auto audit = privacy_audit(f5, p, sc_layout(p), pts);
  if (audit.secrets_checked != 25 || audit.max_tv != 0.0) {
    return {false, "TV " + fmt(audit.max_tv) + " over " + std::to_string(audit.secrets_checked)};
  }
  const PrimeField f7(7);
  std::size_t systems = 0;
  for (std::size_t n = 3; n <= 6; ++n) {
    for (std::size_t k = 2; k < n; ++k) {
      const auto q = sc_params(n, k);
      const auto l = sc_layout(q);
      for (std::uint32_t w = 1; w <= n; ++w) {
        if (key_share_rank(f7, l, default_staircase_points(n), w) != q.alpha()) {
          return {false, "rank deficit at (" + std::to_string(n) + "," + std::to_string(k) + ")"};
        }
      }
      ++systems;
    }
  }
  return {true, "TV 0 over 25 secrets; full key rank in " + std::to_string(systems) + " systems"};
}

Outcome domination() {
  std::string detail;
  for (auto [n, k] : {std::pair{4u, 2u}, std::pair{6u, 4u}, std::pair{8u, 2u}}) {
    std::mt19937_64 rng(100 + n);
    double sc = 0, ss = 0;
    for (int i = 0; i < 100000; ++i) {
      const auto s = sample_delays(n, k, DelayModel{1.0, 0.0}, rng);
      if (s.t_sc > s.t_ss) return {false, "t_sc > t_ss in a sample"};
      sc += s.t_sc;
      ss += s.t_ss;
    }
    if (sc > ss) return {false, "mean order reversed"};
    detail += "(" + std::to_string(n) + "," + std::to_string(k) + ") " + fmt(sc / 1e5) + " <= " +
              fmt(ss / 1e5) + "; ";
  }
  return {true, detail};
}

Outcome cdf_consistency() {
  const double t_max = (std::log(4.0) - std::log(1e-12)) / 1.0;
  const double mean = integrate_adaptive([](double t) { return 1.0 - cdf_tsc(t, 4, 2, 1.0); }, 0.0,
                                         t_max, 1e-7);
  const double err = std::abs(mean - 26.0 / 63);
  double prev = -1.0;
  for (int i = 0; i < 200; ++i) {
    const double t = 3.0 * i / 199.0;
    const double c = cdf_tsc(t, 4, 2, 1.0);
    if (c < 0.0 || c > 1.0 || c < prev) return {false, "CDF not monotone in [0,1] at t=" + fmt(t)};
    prev = c;
  }
  return {err <= 1e-4, "integral of 1-F = " + fmt(mean) + ", err " + fmt(err)};
}

Outcome renyi() {
  const std::size_t n = 5, k = 3, reps = 100000;
  std::mt19937_64 rng(31);
  std::exponential_distribution<double> expo(double(k - 1));
  std::string detail;
  bool ok = true;
  for (std::size_t d = 3; d <= 5; ++d) {
    std::vector<double> direct(reps), transformed(reps);
    for (std::size_t i = 0; i < reps; ++i) {
      std::vector<double> t(n);
      for (auto& v : t) v = expo(rng);
      std::sort(t.begin(), t.end());
      direct[i] = t[d - 1];
      std::vector<double> z(d);
      for (auto& v : z) v = expo(rng);
      transformed[i] = renyi_transform(z, n);
    }
    const double ks = oracle::ks_distance(direct, transformed);
    ok = ok && ks <= 0.02;
    detail += "d=" + std::to_string(d) + " KS " + fmt(ks) + "; ";
  }
  return {ok, detail};
}

Outcome equivalence() {
  const PrimeField f;
  const CodingSystem sys(f, 4, 2, Scheme::Staircase);
  std::mt19937_64 data(5);
  const FieldMatrix a = random_matrix(f, 12, 3, data);
  const FieldMatrix x = random_matrix(f, 3, 1, data);
  const FieldMatrix ax = mat_mul(f, a, x);
  for (std::uint64_t seed = 1; seed <= 10000; ++seed) {
    const auto s = simulate_run(a, x, sys, DelayModel{1.0, 0.0}, seed);
    if (s.decoded.time != s.sample.t_sc) {
      return {false, "seed " + std::to_string(seed) + ": " + fmt(s.decoded.time) + " vs " + fmt(s.sample.t_sc)};
    }
    if (s.decoded.result != ax) return {false, "wrong product at seed " + std::to_string(seed)};
  }
  return {true, "10000 seeds, exact equality"};
}

Outcome networked_demo() {
  const PrimeField f;
  std::mt19937_64 rng(12);
  const FieldMatrix a = random_matrix(f, 60, 4, rng);
  const FieldMatrix x = random_matrix(f, 4, 1, rng);
  const std::string dir = oracle::make_temp_dir();
  write_matrix_file(dir + "/a.mat", a, f.modulus());
  write_matrix_file(dir + "/x.mat", x, f.modulus());

  const std::string cli = SDMM_CLI_PATH;
  std::vector<oracle::Child> workers;
  std::string addresses;
  auto cleanup = [&] {
    for (auto& w : workers) oracle::kill_child(w);
  };
  for (int i = 0; i < 3; ++i) {
    workers.push_back(oracle::spawn({cli, "worker", "--listen", "127.0.0.1:0", "--once"}));
    const std::string line = oracle::read_line(workers.back(), 5000);
    const std::string prefix = "listening on ";
    if (line.rfind(prefix, 0) != 0) {
      cleanup();
      return {false, "worker did not report its address: '" + line + "'"};
    }
    addresses += (addresses.empty() ? "" : ",") + line.substr(prefix.size());
  }
  auto master = oracle::spawn({cli, "master", "--workers", addresses, "--n", "3", "--k", "2",
                               "--scheme", "staircase", "--input", dir + "/a.mat", "--x",
                               dir + "/x.mat"});
  const auto [status, output] = oracle::wait_output(master);
  for (auto& w : workers) oracle::wait_output(w);  // --once: they exit after the session
  if (status != 0) return {false, "master exited with " + std::to_string(status)};
  std::istringstream in(output);
  const MatrixFile got = read_matrix(in);
  const bool ok = got.q == f.modulus() && got.matrix == mat_mul(f, a, x);
  return {ok, ok ? "decoded 60x1 product matches" : "decoded product differs"};
}

}  // namespace

int main() {
  criterion(1, "table-i-reproduction", 1.0, table_one);
  criterion(2, "two-parity-bound-regression", 1.0, bound_regression);
  criterion(3, "closed-form-means", 0.0, closed_forms);
  criterion(4, "monte-carlo-vs-exact", 20.0, mc_vs_exact);
  criterion(5, "fixed-rate-regression", 0.0, fixed_rate_regression);
  criterion(6, "decode-universality", 30.0, decode_universality);
  criterion(7, "privacy", 0.0, privacy);
  criterion(8, "pointwise-domination", 0.0, domination);
  criterion(9, "cdf-consistency", 0.0, cdf_consistency);
  criterion(10, "renyi-representation", 0.0, renyi);
  criterion(11, "simulator-formula-equivalence", 0.0, equivalence);
  criterion(12, "networked-demo", 5.0, networked_demo);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
