#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sdmm/errors.hpp"

namespace sdmm {

using Element = std::uint32_t;

inline constexpr Element kDefaultModulus = 2147483647u;

// Arithmetic modulo a runtime prime q < 2^32. Products are formed in 64 bits.
class PrimeField {
 public:
  explicit PrimeField(Element q = kDefaultModulus);

  Element modulus() const { return q_; }

  Element reduce(std::uint64_t v) const { return static_cast<Element>(v % q_); }
  Element reduce_signed(std::int64_t v) const;

  Element add(Element a, Element b) const {
    std::uint64_t s = std::uint64_t{a} + b;
    return static_cast<Element>(s >= q_ ? s - q_ : s);
  }
  Element sub(Element a, Element b) const {
    return a >= b ? a - b : static_cast<Element>(std::uint64_t{a} + q_ - b);
  }
  Element neg(Element a) const { return a == 0 ? 0 : q_ - a; }
  Element mul(Element a, Element b) const {
    return static_cast<Element>((std::uint64_t{a} * b) % q_);
  }
  Element pow(Element base, std::uint64_t exp) const;
  // Throws DivisionByZero for a == 0.
  Element inv(Element a) const;
  Element div(Element a, Element b) const { return mul(a, inv(b)); }

  bool contains(Element a) const { return a < q_; }

  bool operator==(const PrimeField& o) const { return q_ == o.q_; }

 private:
  Element q_;
};

bool is_prime(std::uint64_t v);

// Dense row-major matrix of field elements. Dimensions are always positive.
class FieldMatrix {
 public:
  FieldMatrix(std::size_t rows, std::size_t cols);
  FieldMatrix(std::size_t rows, std::size_t cols, std::vector<Element> entries);

  static FieldMatrix column(std::vector<Element> entries);
  static FieldMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  Element& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Element operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<Element> entries() { return data_; }
  std::span<const Element> entries() const { return data_; }

  bool is_zero() const;
  bool same_shape(const FieldMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool operator==(const FieldMatrix&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<Element> data_;
};

// One evaluation of the column polynomial: sum_j point^j * c[j] == value.
struct Evaluation {
  Element point;
  Element value;
};

struct KnownEntry {
  std::size_t row;  // 0-based row of the column
  Element value;
};

// Block-valued counterparts used when every column entry is a matrix.
struct BlockEvaluation {
  Element point;
  FieldMatrix value;
};

struct KnownBlock {
  std::size_t row;
  FieldMatrix value;
};

// [1, x, x^2, ..., x^(width-1)] mod q.
std::vector<Element> vandermonde_row(const PrimeField& f, Element x, std::size_t width);

// Recovers the unique column of length `height` that matches the known entries
// and the polynomial evaluations. Extra equations are used as consistency checks.
std::vector<Element> solve_column(const PrimeField& f, std::span<const Evaluation> equations,
                                  std::span<const KnownEntry> knowns, std::size_t height);

std::vector<FieldMatrix> solve_block_column(const PrimeField& f,
                                            std::span<const BlockEvaluation> equations,
                                            std::span<const KnownBlock> knowns,
                                            std::size_t height);

FieldMatrix mat_mul(const PrimeField& f, const FieldMatrix& a, const FieldMatrix& b);
FieldMatrix mat_add(const PrimeField& f, const FieldMatrix& a, const FieldMatrix& b);
FieldMatrix mat_scale(const PrimeField& f, Element s, const FieldMatrix& a);
// a += s * b
void axpy(const PrimeField& f, Element s, const FieldMatrix& b, FieldMatrix& a);

std::size_t rank(const PrimeField& f, FieldMatrix m);

// Splits `a` into `parts` equal row blocks, padding with zero rows first.
std::vector<FieldMatrix> split_rows(const FieldMatrix& a, std::size_t parts);
// Stacks blocks vertically and keeps the first `rows` rows.
FieldMatrix join_rows(std::span<const FieldMatrix> blocks, std::size_t rows);

}  // namespace sdmm
