#include "sdmm/field.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace sdmm {

bool is_prime(std::uint64_t v) {
  if (v < 2) return false;
  if (v % 2 == 0) return v == 2;
  for (std::uint64_t d = 3; d * d <= v; d += 2) {
    if (v % d == 0) return false;
  }
  return true;
}

PrimeField::PrimeField(Element q) : q_(q) {
  if (!is_prime(q)) {
    throw std::invalid_argument("field modulus " + std::to_string(q) + " is not prime");
  }
}

Element PrimeField::reduce_signed(std::int64_t v) const {
  std::int64_t r = v % static_cast<std::int64_t>(q_);
  if (r < 0) r += q_;
  return static_cast<Element>(r);
}

Element PrimeField::pow(Element base, std::uint64_t exp) const {
  std::uint64_t result = 1 % q_;
  std::uint64_t b = base % q_;
  while (exp > 0) {
    if (exp & 1) result = (result * b) % q_;
    b = (b * b) % q_;
    exp >>= 1;
  }
  return static_cast<Element>(result);
}

Element PrimeField::inv(Element a) const {
  if (a % q_ == 0) throw DivisionByZero();
  // Fermat: a^(q-2)
  return pow(a, q_ - 2);
}

FieldMatrix::FieldMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0) {
  if (rows == 0 || cols == 0) throw DimensionMismatch("matrix dimensions must be positive");
}

FieldMatrix::FieldMatrix(std::size_t rows, std::size_t cols, std::vector<Element> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (rows == 0 || cols == 0) throw DimensionMismatch("matrix dimensions must be positive");
  if (data_.size() != rows * cols) {
    throw DimensionMismatch("entry count " + std::to_string(data_.size()) + " does not match " +
                            std::to_string(rows) + "x" + std::to_string(cols));
  }
}

FieldMatrix FieldMatrix::column(std::vector<Element> entries) {
  std::size_t n = entries.size();
  return FieldMatrix(n, 1, std::move(entries));
}

FieldMatrix FieldMatrix::identity(std::size_t n) {
  FieldMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
  return m;
}

bool FieldMatrix::is_zero() const {
  return std::all_of(data_.begin(), data_.end(), [](Element e) { return e == 0; });
}

std::vector<Element> vandermonde_row(const PrimeField& f, Element x, std::size_t width) {
  if (width == 0) throw std::invalid_argument("vandermonde width must be at least 1");
  std::vector<Element> row(width);
  Element p = f.reduce(1);
  Element xr = f.reduce(x);
  for (std::size_t j = 0; j < width; ++j) {
    row[j] = p;
    p = f.mul(p, xr);
  }
  return row;
}

namespace {

// Shared solver: each column entry is a vector of `width` field elements.
std::vector<std::vector<Element>> solve_generic(
    const PrimeField& f, const std::vector<Element>& points,
    const std::vector<std::vector<Element>>& values, const std::vector<std::size_t>& known_rows,
    const std::vector<std::vector<Element>>& known_values, std::size_t height, std::size_t width) {
  if (height == 0) throw std::invalid_argument("column height must be positive");

  std::set<Element> seen;
  for (Element p : points) {
    if (!f.contains(p)) throw std::invalid_argument("evaluation point outside the field");
    if (!seen.insert(p).second) throw std::invalid_argument("duplicate evaluation point");
  }

  std::vector<bool> known(height, false);
  std::vector<std::vector<Element>> column(height, std::vector<Element>(width, 0));
  for (std::size_t i = 0; i < known_rows.size(); ++i) {
    std::size_t r = known_rows[i];
    if (r >= height) throw std::invalid_argument("known row outside the column");
    if (known[r]) throw std::invalid_argument("known row given twice");
    known[r] = true;
    column[r] = known_values[i];
  }

  std::vector<std::size_t> unknown;
  for (std::size_t r = 0; r < height; ++r) {
    if (!known[r]) unknown.push_back(r);
  }
  const std::size_t u = unknown.size();
  if (points.size() < u) {
    throw Underdetermined("column of height " + std::to_string(height) + " with " +
                          std::to_string(known_rows.size()) + " known entries needs " +
                          std::to_string(u) + " equations, got " +
                          std::to_string(points.size()));
  }

  // Residual right-hand sides after removing the known contributions.
  auto residual = [&](std::size_t e) {
    std::vector<Element> rhs = values[e];
    std::vector<Element> powers = vandermonde_row(f, points[e], height);
    for (std::size_t r = 0; r < height; ++r) {
      if (!known[r]) continue;
      for (std::size_t w = 0; w < width; ++w) {
        rhs[w] = f.sub(rhs[w], f.mul(powers[r], column[r][w]));
      }
    }
    return std::pair{powers, rhs};
  };

  if (u > 0) {
    // Augmented system [coeff | rhs], u x (u + width).
    std::vector<std::vector<Element>> aug(u);
    for (std::size_t e = 0; e < u; ++e) {
      auto [powers, rhs] = residual(e);
      aug[e].reserve(u + width);
      for (std::size_t c : unknown) aug[e].push_back(powers[c]);
      aug[e].insert(aug[e].end(), rhs.begin(), rhs.end());
    }
    for (std::size_t col = 0; col < u; ++col) {
      std::size_t pivot = col;
      while (pivot < u && aug[pivot][col] == 0) ++pivot;
      if (pivot == u) throw Underdetermined("singular evaluation system");
      std::swap(aug[pivot], aug[col]);
      Element scale = f.inv(aug[col][col]);
      for (auto& v : aug[col]) v = f.mul(v, scale);
      for (std::size_t r = 0; r < u; ++r) {
        if (r == col || aug[r][col] == 0) continue;
        Element factor = aug[r][col];
        for (std::size_t c = col; c < u + width; ++c) {
          aug[r][c] = f.sub(aug[r][c], f.mul(factor, aug[col][c]));
        }
      }
    }
    for (std::size_t i = 0; i < u; ++i) {
      column[unknown[i]].assign(aug[i].begin() + static_cast<std::ptrdiff_t>(u), aug[i].end());
    }
  }

  // Surplus equations must agree with the solution.
  for (std::size_t e = u; e < points.size(); ++e) {
    std::vector<Element> powers = vandermonde_row(f, points[e], height);
    for (std::size_t w = 0; w < width; ++w) {
      Element acc = 0;
      for (std::size_t r = 0; r < height; ++r) acc = f.add(acc, f.mul(powers[r], column[r][w]));
      if (acc != values[e][w]) throw Inconsistent("evaluation disagrees with decoded column");
    }
  }
  return column;
}

}  // namespace

std::vector<Element> solve_column(const PrimeField& f, std::span<const Evaluation> equations,
                                  std::span<const KnownEntry> knowns, std::size_t height) {
  std::vector<Element> points;
  std::vector<std::vector<Element>> values;
  for (const auto& e : equations) {
    if (!f.contains(e.value)) throw std::invalid_argument("value outside the field");
    points.push_back(e.point);
    values.push_back({e.value});
  }
  std::vector<std::size_t> rows;
  std::vector<std::vector<Element>> kv;
  for (const auto& k : knowns) {
    rows.push_back(k.row);
    kv.push_back({f.reduce(k.value)});
  }
  auto solved = solve_generic(f, points, values, rows, kv, height, 1);
  std::vector<Element> out(height);
  for (std::size_t r = 0; r < height; ++r) out[r] = solved[r][0];
  return out;
}

std::vector<FieldMatrix> solve_block_column(const PrimeField& f,
                                            std::span<const BlockEvaluation> equations,
                                            std::span<const KnownBlock> knowns,
                                            std::size_t height) {
  const FieldMatrix* shape = nullptr;
  if (!equations.empty()) shape = &equations.front().value;
  else if (!knowns.empty()) shape = &knowns.front().value;
  if (shape == nullptr) throw Underdetermined("no equations and no known entries");
  const std::size_t rows = shape->rows();
  const std::size_t cols = shape->cols();

  std::vector<Element> points;
  std::vector<std::vector<Element>> values;
  for (const auto& e : equations) {
    if (!e.value.same_shape(*shape)) throw DimensionMismatch("block shapes differ");
    points.push_back(e.point);
    values.emplace_back(e.value.entries().begin(), e.value.entries().end());
  }
  std::vector<std::size_t> krows;
  std::vector<std::vector<Element>> kv;
  for (const auto& k : knowns) {
    if (!k.value.same_shape(*shape)) throw DimensionMismatch("block shapes differ");
    krows.push_back(k.row);
    kv.emplace_back(k.value.entries().begin(), k.value.entries().end());
  }
  auto solved = solve_generic(f, points, values, krows, kv, height, rows * cols);
  std::vector<FieldMatrix> out;
  out.reserve(height);
  for (auto& v : solved) out.emplace_back(rows, cols, std::move(v));
  return out;
}

FieldMatrix mat_mul(const PrimeField& f, const FieldMatrix& a, const FieldMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("cannot multiply " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " by " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
  const std::uint64_t q = f.modulus();
  FieldMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      std::uint64_t acc = 0;
      for (std::size_t t = 0; t < a.cols(); ++t) {
        acc = (acc + std::uint64_t{a(i, t)} * b(t, j)) % q;
      }
      c(i, j) = static_cast<Element>(acc);
    }
  }
  return c;
}

FieldMatrix mat_add(const PrimeField& f, const FieldMatrix& a, const FieldMatrix& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("cannot add matrices of different shapes");
  FieldMatrix c = a;
  auto ce = c.entries();
  auto be = b.entries();
  for (std::size_t i = 0; i < ce.size(); ++i) ce[i] = f.add(ce[i], be[i]);
  return c;
}

FieldMatrix mat_scale(const PrimeField& f, Element s, const FieldMatrix& a) {
  FieldMatrix c = a;
  for (auto& e : c.entries()) e = f.mul(s, e);
  return c;
}

void axpy(const PrimeField& f, Element s, const FieldMatrix& b, FieldMatrix& a) {
  if (!a.same_shape(b)) throw DimensionMismatch("cannot add matrices of different shapes");
  if (s == 0) return;
  auto ae = a.entries();
  auto be = b.entries();
  for (std::size_t i = 0; i < ae.size(); ++i) ae[i] = f.add(ae[i], f.mul(s, be[i]));
}

std::size_t rank(const PrimeField& f, FieldMatrix m) {
  std::size_t r = 0;
  for (std::size_t col = 0; col < m.cols() && r < m.rows(); ++col) {
    std::size_t pivot = r;
    while (pivot < m.rows() && m(pivot, col) == 0) ++pivot;
    if (pivot == m.rows()) continue;
    for (std::size_t c = 0; c < m.cols(); ++c) std::swap(m(pivot, c), m(r, c));
    Element scale = f.inv(m(r, col));
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = f.mul(m(r, c), scale);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (i == r || m(i, col) == 0) continue;
      Element factor = m(i, col);
      for (std::size_t c = 0; c < m.cols(); ++c) m(i, c) = f.sub(m(i, c), f.mul(factor, m(r, c)));
    }
    ++r;
  }
  return r;
}

std::vector<FieldMatrix> split_rows(const FieldMatrix& a, std::size_t parts) {
  if (parts == 0) throw std::invalid_argument("cannot split into zero blocks");
  const std::size_t block_rows = (a.rows() + parts - 1) / parts;
  std::vector<FieldMatrix> blocks;
  blocks.reserve(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    FieldMatrix b(block_rows, a.cols());
    for (std::size_t r = 0; r < block_rows; ++r) {
      std::size_t src = p * block_rows + r;
      if (src >= a.rows()) break;
      for (std::size_t c = 0; c < a.cols(); ++c) b(r, c) = a(src, c);
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

FieldMatrix join_rows(std::span<const FieldMatrix> blocks, std::size_t rows) {
  if (blocks.empty()) throw std::invalid_argument("no blocks to join");
  const std::size_t cols = blocks.front().cols();
  std::size_t total = 0;
  for (const auto& b : blocks) {
    if (b.cols() != cols) throw DimensionMismatch("blocks have different widths");
    total += b.rows();
  }
  if (rows == 0 || rows > total) throw DimensionMismatch("requested row count exceeds blocks");
  FieldMatrix out(rows, cols);
  std::size_t r = 0;
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b.rows() && r < rows; ++i, ++r) {
      for (std::size_t c = 0; c < cols; ++c) out(r, c) = b(i, c);
    }
  }
  return out;
}

}  // namespace sdmm
