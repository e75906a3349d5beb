#include "sdmm/ramp.hpp"

#include <set>
#include <string>

namespace sdmm {

std::vector<Element> default_ramp_points(std::size_t n) {
  std::vector<Element> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = static_cast<Element>(i);
  return pts;
}

std::vector<RampShare> ss_encode(const PrimeField& f, std::span<const FieldMatrix> secret_blocks,
                                 const FieldMatrix& key, std::span<const Element> points) {
  if (secret_blocks.empty()) throw std::invalid_argument("ramp sharing needs k-1 >= 1 blocks");
  for (const auto& b : secret_blocks) {
    if (!b.same_shape(key)) throw DimensionMismatch("secret and key blocks differ in shape");
  }
  std::set<Element> seen;
  for (Element p : points) {
    if (!f.contains(p)) throw std::invalid_argument("evaluation point outside the field");
    if (!seen.insert(p).second) throw std::invalid_argument("duplicate evaluation point");
  }

  std::vector<RampShare> shares;
  shares.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto powers = vandermonde_row(f, points[i], secret_blocks.size() + 1);
    FieldMatrix s = key;
    for (std::size_t j = 0; j < secret_blocks.size(); ++j) {
      axpy(f, powers[j + 1], secret_blocks[j], s);
    }
    shares.push_back({static_cast<std::uint32_t>(i + 1), points[i], std::move(s)});
  }
  return shares;
}

std::vector<FieldMatrix> ss_decode(const PrimeField& f, std::span<const RampShare> shares,
                                   std::size_t k) {
  if (k < 2) throw std::invalid_argument("ramp threshold k must be at least 2");
  if (shares.size() < k) {
    throw Underdetermined("ramp decoding needs " + std::to_string(k) + " shares, got " +
                          std::to_string(shares.size()));
  }
  std::vector<BlockEvaluation> eqs;
  eqs.reserve(shares.size());
  for (const auto& s : shares) eqs.push_back({s.point, s.block});
  auto coeffs = solve_block_column(f, eqs, {}, k);
  coeffs.erase(coeffs.begin());  // drop the key
  return coeffs;
}

}  // namespace sdmm
