#pragma once

#include <cmath>
#include <functional>

namespace sdmm {

struct QuadratureEstimate {
  double value;
  double error;  // |K15 - G7|
};

// One 15-point Kronrod rule with its embedded 7-point Gauss rule on [a, b].
QuadratureEstimate gauss_kronrod_15(const std::function<double(double)>& f, double a, double b);

// Adaptive bisection until each panel's error estimate is below its share of
// the absolute tolerance.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double abs_tol, unsigned max_depth = 24);

}  // namespace sdmm
