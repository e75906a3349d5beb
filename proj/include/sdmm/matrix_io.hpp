#pragma once

#include <iosfwd>
#include <string>

#include "sdmm/field.hpp"

namespace sdmm {

// Text format: a "rows cols q" line, then rows*cols integers in row-major
// order, whitespace separated.
struct MatrixFile {
  FieldMatrix matrix;
  Element q;
};

MatrixFile read_matrix(std::istream& in);
MatrixFile read_matrix_file(const std::string& path);
void write_matrix(std::ostream& out, const FieldMatrix& m, Element q);
void write_matrix_file(const std::string& path, const FieldMatrix& m, Element q);

}  // namespace sdmm
