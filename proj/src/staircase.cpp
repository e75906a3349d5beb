#include "sdmm/staircase.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "sdmm/bytes.hpp"

namespace sdmm {

StaircaseParams::StaircaseParams(std::size_t n, std::size_t k) : n_(n), k_(k), alpha_(1) {
  if (k < 2) throw std::invalid_argument("staircase codes need k >= 2");
  if (n <= k) throw std::invalid_argument("staircase codes need n > k");
  for (std::size_t v = k; v <= n - 1; ++v) {
    alpha_ = std::lcm(alpha_, v);
    if (alpha_ > kMaxAlpha) {
      throw std::invalid_argument("alpha = LCM{" + std::to_string(k) + ".." +
                                  std::to_string(n - 1) + "} exceeds " +
                                  std::to_string(kMaxAlpha));
    }
  }
  beta_.assign(n + 2, 0);
  for (std::size_t d = k; d <= n; ++d) beta_[d] = alpha_ * (k - 1) / (d - 1);
}

std::size_t StaircaseParams::beta(std::size_t d) const {
  if (d == n_ + 1) return 0;
  if (d < k_ || d > n_) {
    throw std::out_of_range("d = " + std::to_string(d) + " outside [" + std::to_string(k_) +
                            ", " + std::to_string(n_) + "]");
  }
  return beta_[d];
}

std::size_t StaircaseParams::width(std::size_t d) const { return beta(d) - beta(d + 1); }

Fraction StaircaseParams::fraction(std::size_t d) const {
  beta(d);  // range check
  std::size_t g = std::gcd(k_ - 1, d - 1);
  return {(k_ - 1) / g, (d - 1) / g};
}

std::size_t StaircaseParams::column_height(std::size_t t) const {
  if (t < 1 || t > alpha_) throw std::out_of_range("column index out of range");
  for (std::size_t d = n_; d >= k_; --d) {
    if (t <= beta_[d]) return d;
  }
  return k_;  // unreachable: beta(k) == alpha
}

StaircaseParams sc_params(std::size_t n, std::size_t k) { return StaircaseParams(n, k); }

std::string to_string(const Cell& c) {
  switch (c.kind) {
    case CellKind::Zero:
      return "0";
    case CellKind::Secret:
      return "A" + std::to_string(c.index);
    case CellKind::FreshKey:
      return "R" + std::to_string(c.index);
    case CellKind::Copy:
      return "C(" + std::to_string(c.src_row) + "," + std::to_string(c.src_col) + ")";
  }
  return "?";
}

StaircaseLayout::StaircaseLayout(std::size_t n, std::size_t alpha)
    : n_(n), alpha_(alpha), cells_(n * alpha), heights_(alpha, n) {
  if (n == 0 || alpha == 0) throw std::invalid_argument("empty layout");
}

const Cell& StaircaseLayout::at(std::size_t row, std::size_t col) const {
  if (row < 1 || row > n_ || col < 1 || col > alpha_) throw std::out_of_range("cell out of range");
  return cells_[(row - 1) * alpha_ + (col - 1)];
}

void StaircaseLayout::set(std::size_t row, std::size_t col, Cell c) {
  if (row < 1 || row > n_ || col < 1 || col > alpha_) throw std::out_of_range("cell out of range");
  cells_[(row - 1) * alpha_ + (col - 1)] = c;
}

std::size_t StaircaseLayout::height(std::size_t col) const {
  if (col < 1 || col > alpha_) throw std::out_of_range("column out of range");
  return heights_[col - 1];
}

void StaircaseLayout::set_height(std::size_t col, std::size_t h) {
  if (col < 1 || col > alpha_) throw std::out_of_range("column out of range");
  if (h < 1 || h > n_) throw std::out_of_range("height out of range");
  heights_[col - 1] = h;
}

StaircaseLayout sc_layout(const StaircaseParams& p) {
  const std::size_t n = p.n();
  StaircaseLayout layout(n, p.alpha());

  // Tallest group: secrets column-major in rows 1..n-1.
  std::size_t secret = 1;
  for (std::size_t t = 1; t <= p.beta(n); ++t) {
    layout.set_height(t, n);
    for (std::size_t r = 1; r <= n - 1; ++r) layout.set(r, t, Cell::secret(secret++));
  }

  // Shorter group d copies row d+1 of every taller column, column-major.
  for (std::size_t d = n - 1; d >= p.k(); --d) {
    std::size_t src_col = 1;
    for (std::size_t t = p.beta(d + 1) + 1; t <= p.beta(d); ++t) {
      layout.set_height(t, d);
      for (std::size_t r = 1; r <= d - 1; ++r) layout.set(r, t, Cell::copy(d + 1, src_col++));
    }
  }

  for (std::size_t t = 1; t <= p.alpha(); ++t) {
    layout.set(layout.height(t), t, Cell::fresh_key(t));
  }
  return layout;
}

std::vector<Element> default_staircase_points(std::size_t n) {
  std::vector<Element> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = static_cast<Element>(i + 1);
  return pts;
}

namespace {

void check_points(const PrimeField& f, std::span<const Element> points) {
  std::set<Element> seen;
  for (Element p : points) {
    if (p == 0) throw std::invalid_argument("staircase evaluation points must be nonzero");
    if (!f.contains(p)) throw std::invalid_argument("evaluation point outside the field");
    if (!seen.insert(p).second) throw std::invalid_argument("duplicate evaluation point");
  }
}

// Resolves every non-zero cell of the layout to a block (nullptr for Zero).
std::vector<const FieldMatrix*> instantiate(const StaircaseLayout& layout,
                                            std::span<const FieldMatrix> secrets,
                                            std::span<const FieldMatrix> keys) {
  const std::size_t n = layout.rows();
  const std::size_t a = layout.cols();
  std::vector<const FieldMatrix*> m(n * a, nullptr);
  for (std::size_t r = 1; r <= n; ++r) {
    for (std::size_t c = 1; c <= a; ++c) {
      Cell cell = layout.at(r, c);
      std::size_t hops = 0;
      while (cell.kind == CellKind::Copy) {
        if (++hops > n * a) throw std::invalid_argument("copy cycle in layout");
        cell = layout.at(cell.src_row, cell.src_col);
      }
      if (cell.kind == CellKind::Secret) {
        if (cell.index < 1 || cell.index > secrets.size()) {
          throw std::invalid_argument("secret index out of range");
        }
        m[(r - 1) * a + (c - 1)] = &secrets[cell.index - 1];
      } else if (cell.kind == CellKind::FreshKey) {
        if (cell.index < 1 || cell.index > keys.size()) {
          throw std::invalid_argument("key index out of range");
        }
        m[(r - 1) * a + (c - 1)] = &keys[cell.index - 1];
      }
    }
  }
  return m;
}

}  // namespace

std::vector<StaircaseShare> sc_encode(const PrimeField& f, std::span<const FieldMatrix> secrets,
                                      std::span<const FieldMatrix> keys,
                                      std::span<const Element> points,
                                      const StaircaseLayout& layout) {
  if (points.size() != layout.rows()) {
    throw std::invalid_argument("need one evaluation point per worker");
  }
  check_points(f, points);
  if (secrets.empty() || keys.empty()) throw std::invalid_argument("no secret or key blocks");
  const FieldMatrix& shape = secrets.front();
  for (const auto& b : secrets) {
    if (!b.same_shape(shape)) throw DimensionMismatch("secret blocks differ in shape");
  }
  for (const auto& b : keys) {
    if (!b.same_shape(shape)) throw DimensionMismatch("key blocks differ in shape");
  }

  const auto m = instantiate(layout, secrets, keys);
  const std::size_t a = layout.cols();
  std::vector<StaircaseShare> shares;
  shares.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    StaircaseShare s{static_cast<std::uint32_t>(i + 1), points[i], {}};
    s.subshares.reserve(a);
    auto powers = vandermonde_row(f, points[i], layout.rows());
    for (std::size_t t = 1; t <= a; ++t) {
      FieldMatrix acc(shape.rows(), shape.cols());
      for (std::size_t r = 1; r <= layout.height(t); ++r) {
        const FieldMatrix* v = m[(r - 1) * a + (t - 1)];
        if (v != nullptr) axpy(f, powers[r - 1], *v, acc);
      }
      s.subshares.push_back(std::move(acc));
    }
    shares.push_back(std::move(s));
  }
  return shares;
}

std::size_t sc_read_plan(const StaircaseParams& p, std::size_t d) {
  if (d < p.k() || d > p.n()) throw std::out_of_range("d outside [k, n]");
  return p.beta(d);
}

std::vector<FieldMatrix> sc_decode(const PrimeField& f, const StaircaseParams& p,
                                   const StaircaseLayout& layout,
                                   std::span<const WorkerPrefix> responses, std::size_t d) {
  const std::size_t beta = p.beta(d);
  if (d < p.k()) throw std::out_of_range("d below k");
  if (responses.size() != d) {
    throw DecodeError("decoding with d = " + std::to_string(d) + " needs exactly d workers, got " +
                      std::to_string(responses.size()));
  }
  for (const auto& r : responses) {
    if (r.subshares.size() != beta) {
      throw DecodeError("each worker must contribute exactly its first " + std::to_string(beta) +
                        " subshares");
    }
  }
  const FieldMatrix& shape = responses.front().subshares.front();
  const FieldMatrix zero(shape.rows(), shape.cols());

  const std::size_t n = layout.rows();
  const std::size_t a = layout.cols();
  std::vector<std::optional<FieldMatrix>> recovered(n * a);
  auto slot = [&](std::size_t r, std::size_t c) -> std::optional<FieldMatrix>& {
    return recovered[(r - 1) * a + (c - 1)];
  };

  // Shortest columns first; each solved column hands copies to taller ones.
  std::vector<BlockEvaluation> eqs;
  std::vector<KnownBlock> knowns;
  for (std::size_t t = beta; t >= 1; --t) {
    const std::size_t h = layout.height(t);
    eqs.clear();
    knowns.clear();
    for (const auto& r : responses) eqs.push_back({r.point, r.subshares[t - 1]});
    for (std::size_t row = 1; row <= h; ++row) {
      if (layout.at(row, t).kind == CellKind::Zero) {
        knowns.push_back({row - 1, zero});
      } else if (slot(row, t)) {
        knowns.push_back({row - 1, *slot(row, t)});
      }
    }
    std::vector<FieldMatrix> col;
    try {
      col = solve_block_column(f, eqs, knowns, h);
    } catch (const Underdetermined& e) {
      throw DecodeError("column " + std::to_string(t) + " cannot be solved: " + e.what());
    }
    for (std::size_t row = 1; row <= h; ++row) {
      const Cell& cell = layout.at(row, t);
      slot(row, t) = col[row - 1];
      if (cell.kind == CellKind::Copy) {
        auto& src = slot(cell.src_row, cell.src_col);
        if (src && *src != col[row - 1]) throw Inconsistent("copy disagrees with its source");
        src = col[row - 1];
      }
    }
  }

  std::vector<std::optional<FieldMatrix>> secrets(p.secret_count());
  for (std::size_t r = 1; r <= n; ++r) {
    for (std::size_t c = 1; c <= a; ++c) {
      const Cell& cell = layout.at(r, c);
      if (cell.kind != CellKind::Secret) continue;
      if (cell.index < 1 || cell.index > secrets.size()) {
        throw DecodeError("secret index out of range");
      }
      if (slot(r, c)) secrets[cell.index - 1] = *slot(r, c);
    }
  }
  std::vector<FieldMatrix> out;
  out.reserve(secrets.size());
  for (std::size_t i = 0; i < secrets.size(); ++i) {
    if (!secrets[i]) throw DecodeError("secret " + std::to_string(i + 1) + " not recovered");
    out.push_back(std::move(*secrets[i]));
  }
  return out;
}

std::optional<Decodability> sc_decodable(std::span<const std::size_t> received,
                                         const StaircaseParams& p) {
  if (received.size() != p.n()) throw std::invalid_argument("need one count per worker");
  for (std::size_t d = p.n(); d >= p.k(); --d) {
    const std::size_t need = p.beta(d);
    std::vector<std::uint32_t> workers;
    for (std::size_t i = 0; i < received.size() && workers.size() < d; ++i) {
      if (received[i] >= need) workers.push_back(static_cast<std::uint32_t>(i + 1));
    }
    if (workers.size() == d) return Decodability{d, std::move(workers)};
  }
  return std::nullopt;
}

std::vector<Violation> sc_verify(const StaircaseLayout& layout, const StaircaseParams& p) {
  std::vector<Violation> out;
  auto report = [&](std::string inv, std::string detail) {
    out.push_back({std::move(inv), std::move(detail)});
  };
  const std::size_t n = p.n();
  if (layout.rows() != n || layout.cols() != p.alpha()) {
    report("dimensions", "layout is " + std::to_string(layout.rows()) + "x" +
                             std::to_string(layout.cols()) + ", expected " + std::to_string(n) +
                             "x" + std::to_string(p.alpha()));
    return out;
  }

  std::map<std::size_t, std::size_t> secret_seen;
  std::map<std::size_t, std::size_t> key_seen;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> copy_seen;

  for (std::size_t t = 1; t <= p.alpha(); ++t) {
    const std::size_t h = layout.height(t);
    const std::string col = "column " + std::to_string(t);
    if (h != p.column_height(t)) {
      report("column-heights", col + " has height " + std::to_string(h) + ", expected " +
                                   std::to_string(p.column_height(t)));
    }
    if (t > 1 && h > layout.height(t - 1)) report("column-heights", col + " is taller than its left neighbour");

    std::size_t keys_here = 0;
    for (std::size_t r = 1; r <= n; ++r) {
      const Cell& c = layout.at(r, t);
      const std::string where = "cell (" + std::to_string(r) + "," + std::to_string(t) + ")";
      if (c.kind == CellKind::FreshKey) {
        ++keys_here;
        ++key_seen[c.index];
        if (r != h) report("fresh-key-position", where + " holds a key below the column top");
      }
      if (c.kind == CellKind::Secret) ++secret_seen[c.index];
      if (r > h) {
        if (c.kind != CellKind::Zero) report("zero-above-height", where + " must be zero");
        continue;
      }
      if (r == h) continue;
      if (h == n) {
        if (c.kind != CellKind::Secret) report("secret-placement", where + " must hold a secret");
      } else {
        if (c.kind != CellKind::Copy) {
          report("copy-placement", where + " must hold a copy");
        } else {
          if (c.src_row != h + 1 || c.src_col < 1 || c.src_col > p.beta(h + 1)) {
            report("copy-sources", where + " copies " + to_string(c) + ", outside row " +
                                       std::to_string(h + 1) + " of the taller columns");
          }
          ++copy_seen[{c.src_row, c.src_col}];
        }
      }
    }
    if (keys_here != 1) {
      report("privacy/fresh-key-per-column",
             col + " holds " + std::to_string(keys_here) + " fresh keys, expected exactly 1");
    }
  }

  for (std::size_t d = p.k(); d < n; ++d) {
    for (std::size_t c = 1; c <= p.beta(d + 1); ++c) {
      auto it = copy_seen.find({d + 1, c});
      std::size_t count = it == copy_seen.end() ? 0 : it->second;
      if (count != 1) {
        report("copy-sources", "cell (" + std::to_string(d + 1) + "," + std::to_string(c) +
                                   ") is copied " + std::to_string(count) + " times");
      }
    }
  }
  for (std::size_t i = 1; i <= p.secret_count(); ++i) {
    std::size_t count = secret_seen.count(i) ? secret_seen[i] : 0;
    if (count != 1) {
      report("secret-multiplicity",
             "secret " + std::to_string(i) + " appears " + std::to_string(count) + " times");
    }
  }
  for (const auto& [idx, count] : secret_seen) {
    if (idx < 1 || idx > p.secret_count()) {
      report("secret-multiplicity", "secret index " + std::to_string(idx) + " out of range");
    }
  }
  for (std::size_t i = 1; i <= p.alpha(); ++i) {
    std::size_t count = key_seen.count(i) ? key_seen[i] : 0;
    if (count != 1) {
      report("fresh-key-multiplicity",
             "key " + std::to_string(i) + " appears " + std::to_string(count) + " times");
    }
  }
  return out;
}

namespace {

struct ShareCoefficients {
  FieldMatrix secrets;  // alpha x (#secrets)
  FieldMatrix keys;     // alpha x alpha
};

// The linear map (secrets, keys) -> worker's subshares, one symbol per block.
ShareCoefficients share_coefficients(const PrimeField& f, const StaircaseLayout& layout,
                                     std::span<const Element> points, std::uint32_t worker,
                                     std::size_t n_secrets) {
  const std::size_t a = layout.cols();
  ShareCoefficients out{FieldMatrix(a, std::max<std::size_t>(n_secrets, 1)), FieldMatrix(a, a)};
  const Element x = points[worker - 1];
  auto powers = vandermonde_row(f, x, layout.rows());
  for (std::size_t t = 1; t <= a; ++t) {
    for (std::size_t r = 1; r <= layout.height(t); ++r) {
      Cell cell = layout.at(r, t);
      std::size_t hops = 0;
      while (cell.kind == CellKind::Copy) {
        if (++hops > layout.rows() * a) throw std::invalid_argument("copy cycle in layout");
        cell = layout.at(cell.src_row, cell.src_col);
      }
      if (cell.kind == CellKind::Secret && cell.index >= 1 && cell.index <= n_secrets) {
        auto& e = out.secrets(t - 1, cell.index - 1);
        e = f.add(e, powers[r - 1]);
      } else if (cell.kind == CellKind::FreshKey && cell.index >= 1 && cell.index <= a) {
        auto& e = out.keys(t - 1, cell.index - 1);
        e = f.add(e, powers[r - 1]);
      }
    }
  }
  return out;
}

std::uint64_t checked_pow(std::uint64_t base, std::size_t exp, std::uint64_t limit) {
  std::uint64_t v = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (v > limit / base) return limit + 1;
    v *= base;
  }
  return v;
}

}  // namespace

PrivacyReport privacy_audit(const PrimeField& f, const StaircaseParams& p,
                            const StaircaseLayout& layout, std::span<const Element> points,
                            const PrivacyAuditOptions& opts) {
  if (points.size() != p.n()) throw std::invalid_argument("need one evaluation point per worker");
  const std::uint64_t q = f.modulus();
  const std::size_t a = p.alpha();
  const std::size_t s = p.secret_count();

  const std::uint64_t limit = opts.max_enumeration;
  const std::uint64_t key_tuples = checked_pow(q, a, limit);
  const std::uint64_t secret_tuples =
      opts.candidates.empty() ? checked_pow(q, s, limit) : opts.candidates.size();
  if (key_tuples > limit || secret_tuples > limit || key_tuples * secret_tuples > limit) {
    throw Error("privacy audit would enumerate about q^" + std::to_string(a + s) + " = " +
                std::to_string(q) + "^" + std::to_string(a + s) +
                " configurations, above the limit of " + std::to_string(limit));
  }

  std::vector<std::vector<Element>> candidates = opts.candidates;
  if (candidates.empty()) {
    candidates.reserve(secret_tuples);
    for (std::uint64_t code = 0; code < secret_tuples; ++code) {
      std::vector<Element> v(s);
      std::uint64_t c = code;
      for (std::size_t j = 0; j < s; ++j) {
        v[j] = static_cast<Element>(c % q);
        c /= q;
      }
      candidates.push_back(std::move(v));
    }
  }
  for (const auto& c : candidates) {
    if (c.size() != s) throw std::invalid_argument("candidate secret has wrong length");
  }

  PrivacyReport report;
  report.secrets_checked = candidates.size();
  for (std::uint32_t w = 1; w <= p.n(); ++w) {
    const auto coeff = share_coefficients(f, layout, points, w, s);
    std::set<std::vector<std::uint32_t>> distributions;
    for (const auto& secret : candidates) {
      std::vector<Element> base(a, 0);
      for (std::size_t t = 0; t < a; ++t) {
        for (std::size_t j = 0; j < s; ++j) {
          base[t] = f.add(base[t], f.mul(coeff.secrets(t, j), secret[j]));
        }
      }
      std::vector<std::uint32_t> hist(key_tuples, 0);
      std::vector<Element> key(a, 0);
      for (std::uint64_t kc = 0; kc < key_tuples; ++kc) {
        std::uint64_t c = kc;
        for (std::size_t j = 0; j < a; ++j) {
          key[j] = static_cast<Element>(c % q);
          c /= q;
        }
        std::uint64_t code = 0;
        for (std::size_t t = a; t-- > 0;) {
          Element v = base[t];
          for (std::size_t j = 0; j < a; ++j) v = f.add(v, f.mul(coeff.keys(t, j), key[j]));
          code = code * q + v;
        }
        ++hist[code];
      }
      distributions.insert(std::move(hist));
    }
    double worst = 0.0;
    std::vector<const std::vector<std::uint32_t>*> uniq;
    for (const auto& d : distributions) uniq.push_back(&d);
    for (std::size_t i = 0; i < uniq.size(); ++i) {
      for (std::size_t j = i + 1; j < uniq.size(); ++j) {
        std::uint64_t diff = 0;
        for (std::size_t b = 0; b < key_tuples; ++b) {
          auto x = (*uniq[i])[b];
          auto y = (*uniq[j])[b];
          diff += x > y ? x - y : y - x;
        }
        worst = std::max(worst, 0.5 * static_cast<double>(diff) / static_cast<double>(key_tuples));
      }
    }
    report.worker_tv.push_back(worst);
    report.max_tv = std::max(report.max_tv, worst);
  }
  return report;
}

std::size_t key_share_rank(const PrimeField& f, const StaircaseLayout& layout,
                           std::span<const Element> points, std::uint32_t worker) {
  if (worker < 1 || worker > points.size()) throw std::out_of_range("worker id out of range");
  return rank(f, share_coefficients(f, layout, points, worker, 0).keys);
}

std::vector<std::uint8_t> serialize_share(const StaircaseShare& s, std::size_t n, std::size_t k,
                                          Element q) {
  if (s.subshares.empty()) throw std::invalid_argument("share has no subshares");
  const FieldMatrix& shape = s.subshares.front();
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(n));
  w.u32(static_cast<std::uint32_t>(k));
  w.u32(static_cast<std::uint32_t>(s.subshares.size()));
  w.u32(q);
  w.u32(s.worker);
  w.u32(s.point);
  w.u32(static_cast<std::uint32_t>(shape.rows()));
  w.u32(static_cast<std::uint32_t>(shape.cols()));
  for (const auto& sub : s.subshares) {
    if (!sub.same_shape(shape)) throw DimensionMismatch("subshares differ in shape");
    for (Element e : sub.entries()) w.u32(e);
  }
  return w.take();
}

SerializedShare deserialize_share(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  ShareHeader h;
  h.n = r.u32();
  h.k = r.u32();
  h.alpha = r.u32();
  h.q = r.u32();
  h.worker = r.u32();
  h.point = r.u32();
  h.block_rows = r.u32();
  h.cols = r.u32();
  if (h.alpha == 0 || h.block_rows == 0 || h.cols == 0) throw WireError("empty share dimensions");
  const std::uint64_t entries = std::uint64_t{h.alpha} * h.block_rows * h.cols;
  if (entries * 4 != r.remaining()) throw WireError("share payload length does not match header");
  StaircaseShare s{h.worker, h.point, {}};
  s.subshares.reserve(h.alpha);
  for (std::uint32_t t = 0; t < h.alpha; ++t) {
    std::vector<Element> v(std::size_t{h.block_rows} * h.cols);
    for (auto& e : v) {
      e = r.u32();
      if (e >= h.q) throw WireError("share entry not reduced modulo q");
    }
    s.subshares.emplace_back(h.block_rows, h.cols, std::move(v));
  }
  return {h, std::move(s)};
}

}  // namespace sdmm
