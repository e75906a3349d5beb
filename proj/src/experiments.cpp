#include "sdmm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

#include "sdmm/delay.hpp"
#include "sdmm/errors.hpp"
#include "sdmm/staircase.hpp"

namespace sdmm {

ExperimentConfig::Mode ExperimentConfig::mode() const {
  const bool system = n.has_value() || k.has_value();
  const bool fixed_rate = rate.has_value() || !n_list.empty();
  const bool fixed_parity = parity.has_value() || !k_list.empty();
  const int count = int{system} + int{fixed_rate} + int{fixed_parity};
  if (count != 1) {
    throw std::invalid_argument(
        "choose exactly one of: n and k, rate with an n list, parity with a k list");
  }
  if (reps < 1) throw std::invalid_argument("reps must be at least 1");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be > 0");
  if (system) {
    if (!n || !k) throw std::invalid_argument("a single system needs both n and k");
    if (*k < 2 || *k >= *n) throw std::invalid_argument("need 2 <= k < n");
    return Mode::System;
  }
  if (fixed_rate) {
    if (!rate || n_list.empty()) throw std::invalid_argument("rate sweep needs rate and n list");
    if (!(*rate > 0.0 && *rate < 1.0)) throw std::invalid_argument("rate must lie in (0, 1)");
    return Mode::FixedRate;
  }
  if (!parity || k_list.empty()) throw std::invalid_argument("parity sweep needs parity and k list");
  if (*parity < 1) throw std::invalid_argument("parity must be at least 1");
  return Mode::FixedParity;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  if (used != v.size()) {
    throw std::invalid_argument("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(x);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("'" + key + "' expects a number, got '" + v + "'");
  }
  if (used != v.size()) throw std::invalid_argument("'" + key + "' expects a number, got '" + v + "'");
  return x;
}

}  // namespace

std::map<std::string, std::string> parse_flat_config(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = normalize_key(trim(line.substr(0, eq)));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    }
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> load_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  return parse_flat_config(in);
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(to_size("list", item));
  }
  return out;
}

void apply_config(const std::map<std::string, std::string>& values, ExperimentConfig& cfg,
                  const std::set<std::string>& explicit_keys) {
  for (const auto& [raw_key, v] : values) {
    const std::string key = normalize_key(raw_key);
    if (explicit_keys.count(key)) continue;
    if (key == "n") {
      cfg.n = to_size(key, v);
    } else if (key == "k") {
      cfg.k = to_size(key, v);
    } else if (key == "rate") {
      cfg.rate = to_double(key, v);
    } else if (key == "n-list") {
      cfg.n_list = parse_size_list(v);
    } else if (key == "parity") {
      cfg.parity = to_size(key, v);
    } else if (key == "k-list") {
      cfg.k_list = parse_size_list(v);
    } else if (key == "lambda") {
      cfg.lambda = to_double(key, v);
    } else if (key == "reps") {
      cfg.reps = to_size(key, v);
    } else if (key == "seed") {
      cfg.seed = to_size(key, v);
    } else if (key == "field") {
      const std::size_t q = to_size(key, v);
      if (q > 0xFFFFFFFFull) throw std::invalid_argument("field modulus must fit in 32 bits");
      cfg.field = static_cast<Element>(q);
    } else if (key == "schemes") {
      cfg.schemes.clear();
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) cfg.schemes.push_back(parse_scheme(item));
      }
    } else if (key == "out") {
      cfg.out = v;
    } else {
      throw std::invalid_argument("unknown config key '" + raw_key + "'");
    }
  }
}

std::uint64_t row_seed(std::uint64_t seed, std::size_t n, std::size_t k) {
  // splitmix64 finaliser over the mixed inputs
  std::uint64_t z = seed ^ (std::uint64_t{n} << 32) ^ std::uint64_t{k} * 0x9E3779B97F4A7C15ull;
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

ResultRow make_row(std::size_t n, std::size_t k, double lambda, std::size_t reps,
                   std::uint64_t seed) {
  if (k < 2 || k >= n) throw std::invalid_argument("need 2 <= k < n");
  ResultRow row;
  row.n = n;
  row.k = k;
  row.lambda = lambda;
  const McEstimate mc = mc_mean(n, k, DelayModel{lambda, 0.0}, reps, row_seed(seed, n, k));
  row.mean_sc_mc = mc.mean_sc;
  row.ci95 = mc.ci95_sc;
  row.mean_ss_closed = mean_ss(n, k, lambda);
  row.upper = upper_bound(n, k, lambda).value;
  row.lower = lower_bound(n, k, lambda).value;
  row.exact = exact_mean(n, k, lambda);
  const double sc = row.exact.value_or(row.mean_sc_mc);
  row.savings_norm = savings(row.mean_ss_closed, sc, SavingsMetric::NormalizedDiff);
  row.savings_ratio = savings(row.mean_ss_closed, sc, SavingsMetric::RatioMinusOne);
  return row;
}

namespace {

void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return a.n != b.n ? a.n < b.n : a.k < b.k;
  });
}

}  // namespace

std::vector<ResultRow> run_parity_sweep(std::size_t parity, const std::vector<std::size_t>& ks,
                                        double lambda, std::size_t reps, std::uint64_t seed) {
  if (parity < 1) throw std::invalid_argument("parity must be at least 1");
  std::vector<ResultRow> rows;
  for (std::size_t k : ks) rows.push_back(make_row(k + parity, k, lambda, reps, seed));
  sort_rows(rows);
  return rows;
}

std::vector<ResultRow> run_two_parity_sweep(const std::vector<std::size_t>& ks, double lambda,
                                            std::size_t reps, std::uint64_t seed) {
  return run_parity_sweep(2, ks, lambda, reps, seed);
}

std::vector<ResultRow> run_fixed_rate_sweep(double rate, const std::vector<std::size_t>& ns,
                                            double lambda, std::size_t reps, std::uint64_t seed) {
  if (!(rate > 0.0 && rate < 1.0)) throw std::invalid_argument("rate must lie in (0, 1)");
  std::vector<ResultRow> rows;
  for (std::size_t n : ns) {
    const double kr = rate * static_cast<double>(n);
    const double kk = std::round(kr);
    if (std::fabs(kr - kk) > 1e-9 * std::max(1.0, kr)) {
      throw std::invalid_argument("rate * n is not an integer for n = " + std::to_string(n));
    }
    rows.push_back(make_row(n, static_cast<std::size_t>(kk), lambda, reps, seed));
  }
  sort_rows(rows);
  return rows;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string to_csv(const std::vector<ResultRow>& rows) {
  static const char* const kHeader[] = {"n",      "k",     "lambda", "mean_sc_mc",   "ci95",
                                        "mean_ss_closed",  "upper",  "lower",        "exact",
                                        "savings_norm",    "savings_ratio"};
  std::string out;
  for (std::size_t i = 0; i < std::size(kHeader); ++i) {
    if (i) out += ',';
    out += csv_field(kHeader[i]);
  }
  out += "\r\n";
  for (const auto& r : rows) {
    const std::vector<std::string> cells{
        std::to_string(r.n),          std::to_string(r.k),        format_number(r.lambda),
        format_number(r.mean_sc_mc),  format_number(r.ci95),      format_number(r.mean_ss_closed),
        format_number(r.upper),       format_number(r.lower),
        r.exact ? format_number(*r.exact) : std::string(),
        format_number(r.savings_norm), format_number(r.savings_ratio)};
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_field(cells[i]);
    }
    out += "\r\n";
  }
  return out;
}

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << to_csv(rows);
  if (!f) throw Error("write to '" + path + "' failed");
}

bool SelftestReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const SelftestCheck& c) { return c.passed; });
}

namespace {

// Knocks out the fresh key of the last column.
void mutate_layout(StaircaseLayout& layout) {
  const std::size_t col = layout.cols();
  layout.set(layout.height(col), col, Cell::zero());
}

std::string system_name(std::size_t n, std::size_t k) {
  return "(" + std::to_string(n) + "," + std::to_string(k) + ")";
}

// Every d-subset of workers decodes from its beta(d)-prefixes.
std::optional<std::string> check_universality(const PrimeField& f, const StaircaseParams& p,
                                              const StaircaseLayout& layout, std::mt19937_64& rng) {
  const std::size_t n = p.n();
  std::vector<FieldMatrix> secrets;
  for (std::size_t i = 0; i < p.secret_count(); ++i) secrets.push_back(random_matrix(f, 1, 1, rng));
  std::vector<FieldMatrix> keys;
  for (std::size_t i = 0; i < p.alpha(); ++i) keys.push_back(random_matrix(f, 1, 1, rng));
  const auto points = default_staircase_points(n);
  const auto shares = sc_encode(f, secrets, keys, points, layout);

  for (std::size_t d = p.k(); d <= n; ++d) {
    const std::size_t prefix = p.beta(d);
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(d), true);
    do {
      std::vector<WorkerPrefix> responses;
      for (std::size_t i = 0; i < n; ++i) {
        if (!pick[i]) continue;
        responses.push_back({shares[i].point,
                             {shares[i].subshares.begin(),
                              shares[i].subshares.begin() + static_cast<std::ptrdiff_t>(prefix)}});
      }
      std::vector<FieldMatrix> got;
      try {
        got = sc_decode(f, p, layout, responses, d);
      } catch (const Error& e) {
        return "d=" + std::to_string(d) + ": " + e.what();
      }
      if (got != secrets) return "d=" + std::to_string(d) + ": wrong secrets";
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  return std::nullopt;
}

}  // namespace

SelftestReport selftest(const SelftestOptions& opts) {
  SelftestReport report;
  const PrimeField f(opts.field);
  std::mt19937_64 rng(opts.seed);

  auto add = [&](std::string module, std::string invariant, bool ok, std::string detail) {
    report.checks.push_back({std::move(module), std::move(invariant), ok, std::move(detail)});
  };

  const std::size_t lo = std::max<std::size_t>(opts.min_n, 3);
  if (lo > opts.max_n) {
    report.warnings.push_back("empty (n, k) range [" + std::to_string(opts.min_n) + ", " +
                              std::to_string(opts.max_n) + "]: code checks pass vacuously");
  }
  for (std::size_t n = lo; n <= opts.max_n; ++n) {
    if (opts.field <= n) {
      report.warnings.push_back("field " + std::to_string(opts.field) + " too small for n = " +
                                std::to_string(n) + ", skipped");
      continue;
    }
    for (std::size_t k = 2; k < n; ++k) {
      const StaircaseParams p(n, k);
      if (p.alpha() > 4096) {
        report.warnings.push_back(system_name(n, k) + " alpha too large, skipped");
        continue;
      }
      StaircaseLayout layout = sc_layout(p);
      if (opts.inject_layout_mutation) mutate_layout(layout);
      const std::string sys = system_name(n, k);

      const auto violations = sc_verify(layout, p);
      if (violations.empty()) {
        add("staircase_code", "layout", true, sys);
      } else {
        for (const auto& v : violations) {
          add("staircase_code", v.invariant, false, sys + ": " + v.detail);
        }
      }

      const auto bad = check_universality(f, p, layout, rng);
      add("staircase_code", "decode-universality", !bad, sys + (bad ? ": " + *bad : ""));

      const auto points = default_staircase_points(n);
      std::string rank_detail = sys;
      bool rank_ok = true;
      for (std::uint32_t w = 1; w <= n; ++w) {
        const std::size_t r = key_share_rank(f, layout, points, w);
        if (r != p.alpha()) {
          rank_ok = false;
          rank_detail += ": worker " + std::to_string(w) + " key rank " + std::to_string(r) +
                         " < " + std::to_string(p.alpha());
          break;
        }
      }
      add("staircase_code", "privacy/key-rank", rank_ok, rank_detail);

      // Exhaustive audit only where the enumeration is small.
      const double log_size = static_cast<double>(p.secret_count() + p.alpha()) *
                              std::log(static_cast<double>(opts.field));
      if (log_size <= std::log(2e6)) {
        const auto audit = privacy_audit(f, p, layout, points);
        add("staircase_code", "privacy/exhaustive-tv", audit.max_tv < 1e-12,
            sys + ": max TV " + format_number(audit.max_tv));
      }
    }
  }

  // Bounds must bracket the simulated mean.
  if (opts.sandwich_max_k < 2) {
    report.warnings.push_back("empty k range for the sandwich check: passes vacuously");
  }
  for (std::size_t k = 2; k <= opts.sandwich_max_k; ++k) {
    for (std::size_t n = k + 1; n <= k + 6; ++n) {
      const auto mc = mc_mean(n, k, DelayModel{1.0, 0.0}, opts.sandwich_reps, row_seed(opts.seed, n, k));
      const double lo_b = lower_bound(n, k, 1.0).value;
      const double up_b = upper_bound(n, k, 1.0).value;
      const double slack = 2.0 * mc.ci95_sc;
      const bool ok = lo_b <= mc.mean_sc + slack && mc.mean_sc - slack <= up_b;
      add("delay_analysis", "sandwich", ok,
          system_name(n, k) + ": " + format_number(lo_b) + " <= " + format_number(mc.mean_sc) +
              " <= " + format_number(up_b));
    }
  }

  // Simulated decode time must equal the closed-form waiting time.
  if (opts.equivalence_seeds > 0) {
    const PrimeField big(kDefaultModulus);
    for (Scheme scheme : {Scheme::Staircase, Scheme::Ramp}) {
      const CodingSystem system(big, 4, 2, scheme);
      std::size_t mismatches = 0;
      std::string first;
      for (std::uint64_t s = 1; s <= opts.equivalence_seeds; ++s) {
        std::mt19937_64 data(row_seed(opts.seed, s, 99));
        const FieldMatrix a = random_matrix(big, 6, 3, data);
        const FieldMatrix x = random_matrix(big, 3, 1, data);
        const auto out = simulate_run(a, x, system, DelayModel{1.0, 0.0}, s);
        const double expect = scheme == Scheme::Staircase ? out.sample.t_sc : out.sample.t_ss;
        const bool time_ok = std::fabs(out.decoded.time - expect) <= 1e-12 * std::max(1.0, expect);
        const bool value_ok = out.decoded.result == mat_mul(big, a, x);
        if (!time_ok || !value_ok) {
          if (mismatches++ == 0) {
            first = "seed " + std::to_string(s) + (time_ok ? ": wrong product" : ": time " +
                    format_number(out.decoded.time) + " vs " + format_number(expect));
          }
        }
      }
      add("compute_runtime", "simulator-equivalence/" + to_string(scheme), mismatches == 0,
          mismatches == 0 ? std::to_string(opts.equivalence_seeds) + " seeds"
                          : std::to_string(mismatches) + " mismatches, first " + first);
    }
  }
  return report;
}

}  // namespace sdmm
