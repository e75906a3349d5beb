#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "sdmm/delay.hpp"
#include "sdmm/errors.hpp"
#include "sdmm/experiments.hpp"
#include "sdmm/matrix_io.hpp"
#include "sdmm/net.hpp"
#include "sdmm/ramp.hpp"
#include "sdmm/runtime.hpp"
#include "sdmm/staircase.hpp"

namespace {

using namespace sdmm;

struct Globals {
  std::uint64_t seed = 1;
  std::uint64_t field = kDefaultModulus;
  double lambda = 1.0;
  std::size_t reps = 1'000'000;
  std::string out;
  std::string config;
};

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write to '" + path + "' failed");
}

// Column vector from a matrix file of shape l x 1 or 1 x l.
FieldMatrix read_vector(const std::string& path, const PrimeField& f) {
  const MatrixFile m = read_matrix_file(path);
  if (m.q != f.modulus()) throw Error("'" + path + "' is over a different field");
  if (m.matrix.cols() == 1) return m.matrix;
  if (m.matrix.rows() == 1) {
    return FieldMatrix::column({m.matrix.entries().begin(), m.matrix.entries().end()});
  }
  throw DimensionMismatch("'" + path + "' is not a vector");
}

void emit_text(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

void print_layout(std::size_t n, std::size_t k, std::ostream& os) {
  const StaircaseParams p(n, k);
  const StaircaseLayout layout = sc_layout(p);
  os << "n=" << n << " k=" << k << " alpha=" << p.alpha() << " secrets=" << p.secret_count() << "\n";
  for (std::size_t d = k; d <= n; ++d) {
    const auto fr = p.fraction(d);
    os << "d=" << d << " beta=" << p.beta(d) << " width=" << p.width(d) << " reads " << fr.num
       << "/" << fr.den << "\n";
  }
  std::size_t w = 4;
  for (std::size_t r = 1; r <= n; ++r) {
    for (std::size_t c = 1; c <= p.alpha(); ++c) w = std::max(w, to_string(layout.at(r, c)).size());
  }
  for (std::size_t r = 1; r <= n; ++r) {
    for (std::size_t c = 1; c <= p.alpha(); ++c) {
      os << pad(to_string(layout.at(r, c)), w + 1);
    }
    os << "\n";
  }
  const auto v = sc_verify(layout, p);
  os << (v.empty() ? "layout ok" : "layout has " + std::to_string(v.size()) + " violations") << "\n";
}

std::string share_path(const std::string& dir, std::uint32_t worker) {
  return (std::filesystem::path(dir) / ("worker" + std::to_string(worker) + ".share")).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Secure distributed matrix multiplication with Staircase codes"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--field", g.field, "Prime field modulus");
  app.add_option("--lambda", g.lambda, "Exponential rate of the full task");
  app.add_option("--reps", g.reps, "Monte Carlo replications");
  app.add_option("--out", g.out, "Output path (stdout when empty)");
  app.add_option("--config", g.config, "Flat key=value config file; flags win")->check(CLI::ExistingFile);

  std::size_t n = 0;
  std::size_t k = 0;
  std::string scheme_name = "staircase";

  auto* layout_cmd = app.add_subcommand("layout", "Print the pre-code layout of an (n, k) code");
  layout_cmd->add_option("--n", n)->required();
  layout_cmd->add_option("--k", k)->required();

  std::string input;
  std::string out_dir = ".";
  auto* encode_cmd = app.add_subcommand("encode", "Encode a matrix file into one share file per worker");
  encode_cmd->add_option("--n", n)->required();
  encode_cmd->add_option("--k", k)->required();
  encode_cmd->add_option("--scheme", scheme_name)->check(CLI::IsMember({"staircase", "ramp"}));
  encode_cmd->add_option("--input", input)->required()->check(CLI::ExistingFile);
  encode_cmd->add_option("--dir", out_dir, "Directory for workerN.share files");

  std::vector<std::string> share_files;
  std::size_t rows = 0;
  auto* decode_cmd = app.add_subcommand("decode", "Recover the matrix from d share files");
  decode_cmd->add_option("shares", share_files)->required();
  decode_cmd->add_option("--rows", rows, "Truncate to this many rows (0 keeps padding)");

  std::size_t sim_rows = 60;
  std::size_t sim_cols = 4;
  std::vector<std::uint32_t> unresponsive;
  auto* simulate_cmd = app.add_subcommand("simulate", "One event-driven run with random data");
  simulate_cmd->add_option("--n", n)->required();
  simulate_cmd->add_option("--k", k)->required();
  simulate_cmd->add_option("--scheme", scheme_name)->check(CLI::IsMember({"staircase", "ramp"}));
  simulate_cmd->add_option("--rows", sim_rows);
  simulate_cmd->add_option("--cols", sim_cols);
  simulate_cmd->add_option("--unresponsive", unresponsive, "Worker ids that never answer")
      ->delimiter(',');

  auto* bounds_cmd = app.add_subcommand("bounds", "Bounds, exact mean and Monte Carlo for one system");
  bounds_cmd->add_option("--n", n);
  bounds_cmd->add_option("--k", k);

  std::string k_list;
  auto* two_parity_cmd = app.add_subcommand("sweep-two-parity", "CSV sweep over (k+2, k) systems");
  two_parity_cmd->add_option("--k-list", k_list, "Comma separated k values");

  double rate = 0.25;
  std::string n_list;
  auto* rate_cmd = app.add_subcommand("sweep-rate", "CSV sweep over systems of fixed rate k/n");
  rate_cmd->add_option("--rate", rate);
  rate_cmd->add_option("--n-list", n_list, "Comma separated n values");

  SelftestOptions st;
  auto* selftest_cmd = app.add_subcommand("selftest", "Run the built-in invariant suites");
  selftest_cmd->add_option("--min-n", st.min_n);
  selftest_cmd->add_option("--max-n", st.max_n);
  selftest_cmd->add_option("--max-k", st.sandwich_max_k, "Largest k in the sandwich check");
  selftest_cmd->add_option("--equivalence-seeds", st.equivalence_seeds);
  selftest_cmd->add_flag("--inject-mutation", st.inject_layout_mutation,
                         "Corrupt the layouts to check that failures are reported");

  std::string workers;
  std::string x_file;
  auto* master_cmd = app.add_subcommand("master", "Run one query against TCP workers");
  master_cmd->add_option("--workers", workers, "host:port list, one per worker")->required();
  master_cmd->add_option("--n", n)->required();
  master_cmd->add_option("--k", k)->required();
  master_cmd->add_option("--scheme", scheme_name)->check(CLI::IsMember({"staircase", "ramp"}));
  master_cmd->add_option("--input", input)->required()->check(CLI::ExistingFile);
  master_cmd->add_option("--x", x_file)->required()->check(CLI::ExistingFile);

  std::string listen;
  bool once = false;
  double mean_delay_ms = 0.0;
  auto* worker_cmd = app.add_subcommand("worker", "Serve subresults over TCP");
  worker_cmd->add_option("--listen", listen, "host:port, port 0 picks a free one")->required();
  worker_cmd->add_flag("--once", once, "Exit after the first session");
  worker_cmd->add_option("--mean-delay-ms", mean_delay_ms, "Mean random pause per subresult");

  CLI11_PARSE(app, argc, argv);

  try {
    // Config file first, then whatever was given on the command line.
    ExperimentConfig cfg;
    if (!g.config.empty()) {
      std::set<std::string> given;
      for (const char* key : {"seed", "field", "lambda", "reps", "out"}) {
        if (app.count(std::string("--") + key)) given.insert(key);
      }
      for (auto* sub : app.get_subcommands()) {
        for (const char* key : {"n", "k", "rate", "n-list", "k-list"}) {
          if (sub->get_option_no_throw(std::string("--") + key) &&
              sub->count(std::string("--") + key)) {
            given.insert(key);
          }
        }
      }
      apply_config(load_flat_config(g.config), cfg, given);
      if (!given.count("seed")) g.seed = cfg.seed;
      if (!given.count("field")) g.field = cfg.field;
      if (!given.count("lambda")) g.lambda = cfg.lambda;
      if (!given.count("reps")) g.reps = cfg.reps;
      if (!given.count("out")) g.out = cfg.out;
      if (!given.count("n") && cfg.n) n = *cfg.n;
      if (!given.count("k") && cfg.k) k = *cfg.k;
      if (!given.count("rate") && cfg.rate) rate = *cfg.rate;
      if (!given.count("n-list") && !cfg.n_list.empty()) {
        n_list.clear();
        for (auto v : cfg.n_list) n_list += (n_list.empty() ? "" : ",") + std::to_string(v);
      }
      if (!given.count("k-list") && !cfg.k_list.empty()) {
        k_list.clear();
        for (auto v : cfg.k_list) k_list += (k_list.empty() ? "" : ",") + std::to_string(v);
      }
    }
    if (g.field > 0xFFFFFFFFull) throw std::invalid_argument("--field must fit in 32 bits");
    const PrimeField field(static_cast<Element>(g.field));
    const Scheme scheme = parse_scheme(scheme_name);

    if (*layout_cmd) {
      std::ostringstream os;
      print_layout(n, k, os);
      emit_text(os.str(), g.out);
      return 0;
    }

    if (*encode_cmd) {
      const MatrixFile a = read_matrix_file(input);
      if (a.q != field.modulus()) throw Error("input matrix is over a different field than --field");
      const CodingSystem system(field, n, k, scheme);
      std::mt19937_64 keys = substream(g.seed, 1);
      const Setup setup = master_setup(a.matrix, system, keys);
      std::filesystem::create_directories(out_dir);
      for (const auto& as : setup.assignments) {
        const std::string path = share_path(out_dir, as.worker);
        write_bytes(path, serialize_share(as.share, n, k, field.modulus()));
        std::cout << path << "\n";
      }
      return 0;
    }

    if (*decode_cmd) {
      std::vector<SerializedShare> shares;
      for (const auto& path : share_files) shares.push_back(deserialize_share(read_bytes(path)));
      const ShareHeader& h0 = shares.front().header;
      for (const auto& s : shares) {
        if (s.header.n != h0.n || s.header.k != h0.k || s.header.q != h0.q ||
            s.header.alpha != h0.alpha || s.header.block_rows != h0.block_rows ||
            s.header.cols != h0.cols) {
          throw Error("share files come from different systems");
        }
      }
      const PrimeField f(h0.q);
      const std::size_t d = shares.size();
      std::vector<FieldMatrix> blocks;
      if (h0.alpha == 1) {
        std::vector<RampShare> rs;
        for (const auto& s : shares) rs.push_back({s.share.worker, s.share.point, s.share.subshares[0]});
        blocks = ss_decode(f, rs, h0.k);
      } else {
        const StaircaseParams p(h0.n, h0.k);
        if (d < p.k() || d > p.n()) {
          throw Underdetermined("need between " + std::to_string(p.k()) + " and " +
                                std::to_string(p.n()) + " share files");
        }
        std::vector<WorkerPrefix> prefixes;
        for (const auto& s : shares) {
          prefixes.push_back({s.share.point,
                              {s.share.subshares.begin(),
                               s.share.subshares.begin() + static_cast<std::ptrdiff_t>(p.beta(d))}});
        }
        blocks = sc_decode(f, p, sc_layout(p), prefixes, d);
        std::cerr << "read " << p.beta(d) << " of " << p.alpha() << " subshares per worker\n";
      }
      const std::size_t total = blocks.size() * h0.block_rows;
      const FieldMatrix a = join_rows(blocks, rows == 0 ? total : rows);
      std::ostringstream os;
      write_matrix(os, a, f.modulus());
      emit_text(os.str(), g.out);
      return 0;
    }

    if (*simulate_cmd) {
      const CodingSystem system(field, n, k, scheme);
      std::mt19937_64 data = substream(g.seed, 2);
      const FieldMatrix a = random_matrix(field, sim_rows, sim_cols, data);
      const FieldMatrix x = random_matrix(field, sim_cols, 1, data);
      const auto out = simulate_run(a, x, system, DelayModel{g.lambda, 0.0}, g.seed, unresponsive);
      std::ostringstream os;
      os << std::setprecision(12);
      os << "scheme " << to_string(scheme) << "\n";
      for (std::size_t i = 0; i < out.sample.times.size(); ++i) {
        os << "T_" << i + 1 << " " << out.sample.times[i] << "\n";
      }
      os << "decode_time " << out.decoded.time << "\n";
      os << "d " << out.decoded.d << "\nworkers";
      for (auto w : out.decoded.workers) os << " " << w;
      os << "\nformula_t_sc " << out.sample.t_sc << "\nformula_t_ss " << out.sample.t_ss << "\n";
      os << "correct " << (out.decoded.result == mat_mul(field, a, x) ? "yes" : "no") << "\n";
      emit_text(os.str(), g.out);
      return 0;
    }

    if (*bounds_cmd) {
      if (k < 2 || k >= n) throw std::invalid_argument("bounds needs 2 <= k < n (--n, --k)");
      const auto r = bounds_report(n, k, DelayModel{g.lambda, 0.0}, g.reps, g.seed);
      std::ostringstream os;
      os << std::setprecision(12);
      os << "n " << n << "\nk " << k << "\nlambda " << g.lambda << "\n";
      os << "upper " << r.upper.value << " (d=" << r.upper.d << ")\n";
      os << "lower " << r.lower.value << " (d=" << r.lower.d << ")\n";
      os << "approx_upper " << r.approx_upper << "\n";
      os << "mean_ss " << r.mean_ss << "\n";
      if (r.exact) os << "exact " << *r.exact << "\n";
      if (r.mc) {
        os << "mc_sc " << r.mc->mean_sc << " +- " << r.mc->ci95_sc << "\n";
        os << "mc_ss " << r.mc->mean_ss << " +- " << r.mc->ci95_ss << "\n";
      }
      const double sc = r.exact ? *r.exact : (r.mc ? r.mc->mean_sc : r.upper.value);
      os << "savings_norm " << savings(r.mean_ss, sc, SavingsMetric::NormalizedDiff) << "\n";
      os << "savings_ratio " << savings(r.mean_ss, sc, SavingsMetric::RatioMinusOne) << "\n";
      emit_text(os.str(), g.out);
      return 0;
    }

    if (*two_parity_cmd) {
      const auto ks = k_list.empty() ? kFigureTwoK : parse_size_list(k_list);
      const auto rows_out = run_two_parity_sweep(ks, g.lambda, g.reps, g.seed);
      if (g.out.empty()) {
        std::cout << to_csv(rows_out);
      } else {
        emit_csv(rows_out, g.out);
      }
      return 0;
    }

    if (*rate_cmd) {
      const auto ns = n_list.empty() ? kFigureThreeN : parse_size_list(n_list);
      const auto rows_out = run_fixed_rate_sweep(rate, ns, g.lambda, g.reps, g.seed);
      if (g.out.empty()) {
        std::cout << to_csv(rows_out);
      } else {
        emit_csv(rows_out, g.out);
      }
      return 0;
    }

    if (*selftest_cmd) {
      st.seed = g.seed;
      if (app.count("--field")) st.field = static_cast<Element>(g.field);
      if (app.count("--reps")) st.sandwich_reps = g.reps;
      const auto report = selftest(st);
      for (const auto& w : report.warnings) std::cout << "WARN " << w << "\n";
      for (const auto& c : report.checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.module << " " << c.invariant << " "
                  << c.detail << "\n";
      }
      std::cout << (report.passed() ? "selftest passed" : "selftest FAILED") << std::endl;
      return report.passed() ? 0 : 1;
    }

    if (*master_cmd) {
      const MatrixFile a = read_matrix_file(input);
      if (a.q != field.modulus()) throw Error("input matrix is over a different field than --field");
      const FieldMatrix x = read_vector(x_file, field);
      std::vector<Endpoint> eps;
      std::stringstream ss(workers);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) eps.push_back(parse_endpoint(item));
      }
      if (eps.size() != n) throw std::invalid_argument("--workers must list exactly n addresses");
      const CodingSystem system(field, n, k, scheme);
      std::mt19937_64 keys = substream(g.seed, 1);
      const Setup setup = master_setup(a.matrix, system, keys);
      TcpTransport transport(eps);
      transport.setup(system, setup.assignments);
      const DecodeOutcome outcome = run_query(transport, system, x, setup.rows);
      std::cerr << "decoded from d=" << outcome.d << " workers in " << outcome.time << " s\n";
      std::ostringstream os;
      write_matrix(os, outcome.result, field.modulus());
      emit_text(os.str(), g.out);
      return 0;
    }

    if (*worker_cmd) {
      WorkerOptions wo;
      wo.listen = parse_endpoint(listen);
      wo.field = field.modulus();
      wo.once = once;
      wo.mean_delay_ms = mean_delay_ms;
      wo.seed = g.seed;
      serve_worker(wo, [&](std::uint16_t port) {
        std::cout << "listening on " << wo.listen.host << ":" << port << std::endl;
      });
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
