#include "sdmm/matrix_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace sdmm {

MatrixFile read_matrix(std::istream& in) {
  std::size_t rows = 0, cols = 0;
  std::uint64_t q = 0;
  if (!(in >> rows >> cols >> q)) throw Error("matrix file: missing 'rows cols q' header");
  if (rows == 0 || cols == 0) throw Error("matrix file: dimensions must be positive");
  if (q == 0 || q > 0xFFFFFFFFull) throw Error("matrix file: modulus out of range");
  std::vector<Element> entries(rows * cols);
  for (auto& e : entries) {
    std::uint64_t v = 0;
    if (!(in >> v)) throw Error("matrix file: expected " + std::to_string(rows * cols) + " entries");
    if (v >= q) throw Error("matrix file: entry " + std::to_string(v) + " not below q");
    e = static_cast<Element>(v);
  }
  return {FieldMatrix(rows, cols, std::move(entries)), static_cast<Element>(q)};
}

MatrixFile read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_matrix(in);
}

void write_matrix(std::ostream& out, const FieldMatrix& m, Element q) {
  out << m.rows() << ' ' << m.cols() << ' ' << q << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << m(r, c);
    }
    out << '\n';
  }
}

void write_matrix_file(const std::string& path, const FieldMatrix& m, Element q) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_matrix(out, m, q);
  if (!out) throw Error("write failed for " + path);
}

}  // namespace sdmm
