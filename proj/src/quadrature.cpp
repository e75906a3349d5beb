#include "sdmm/quadrature.hpp"

#include <array>

namespace sdmm {

namespace {

// QUADPACK qk15 nodes and weights.
constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

double integrate_rec(const std::function<double(double)>& f, double a, double b, double tol,
                     unsigned depth, const QuadratureEstimate& whole) {
  if (whole.error <= tol || depth == 0) return whole.value;
  const double mid = 0.5 * (a + b);
  const auto left = gauss_kronrod_15(f, a, mid);
  const auto right = gauss_kronrod_15(f, mid, b);
  if (left.error + right.error <= tol) return left.value + right.value;
  return integrate_rec(f, a, mid, 0.5 * tol, depth - 1, left) +
         integrate_rec(f, mid, b, 0.5 * tol, depth - 1, right);
}

}  // namespace

QuadratureEstimate gauss_kronrod_15(const std::function<double(double)>& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double sum = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[j] * sum;
    // Gauss nodes are the odd-indexed Kronrod nodes.
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * sum;
  }
  return {kronrod * half, std::abs((kronrod - gauss) * half)};
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double abs_tol, unsigned max_depth) {
  if (!(b > a)) return 0.0;
  return integrate_rec(f, a, b, abs_tol, max_depth, gauss_kronrod_15(f, a, b));
}

}  // namespace sdmm
