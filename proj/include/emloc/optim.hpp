#pragma once

#include <functional>
#include <vector>

#include "emloc/types.hpp"

namespace emloc {

struct NelderMeadOptions {
  double initial_step = 0.1;
  double diameter_tol = 1e-4;   // stop when simplex diameter falls below
  double fspread_tol = 1e-8;    // ... and the objective spread falls below
  int max_evals = 2000;
};

struct NelderMeadResult {
  RVector x;
  double fx = 0.0;
  int evals = 0;
  std::vector<double> trace;  // best objective after each accepted step
};

// Derivative-free simplex minimizer; returns the best vertex seen, so the
// result never exceeds the initial objective. Throws invalid_init_error when
// the objective is not finite at the start.
NelderMeadResult nelder_mead(const std::function<double(const RVector&)>& f, const RVector& x0,
                             const NelderMeadOptions& opts);

// Bounded scalar minimization by golden-section; returns argmin, writes the
// minimum value when fmin is non-null.
double golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                          double tol, int max_iters, double* fmin = nullptr);

}  // namespace emloc
