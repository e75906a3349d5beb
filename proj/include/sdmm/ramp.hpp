#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sdmm/field.hpp"

namespace sdmm {

// One share of an (n, k) ramp scheme with a single key block (privacy against
// any one worker). The share polynomial is  R + A_1 x + ... + A_{k-1} x^{k-1}.
struct RampShare {
  std::uint32_t worker;  // 1-based
  Element point;
  FieldMatrix block;
};

// Default ramp evaluation points 0, 1, ..., n-1. x = 0 is legal because the key
// sits on the constant term.
std::vector<Element> default_ramp_points(std::size_t n);

std::vector<RampShare> ss_encode(const PrimeField& f, std::span<const FieldMatrix> secret_blocks,
                                 const FieldMatrix& key, std::span<const Element> points);

// Interpolates from the first k shares (any extra shares are checked for
// consistency) and returns A_1..A_{k-1}. Works unchanged on products S_i x.
std::vector<FieldMatrix> ss_decode(const PrimeField& f, std::span<const RampShare> shares,
                                   std::size_t k);

}  // namespace sdmm
