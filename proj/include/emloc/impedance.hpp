#pragma once

#include <string>

#include "emloc/geometry.hpp"
#include "emloc/types.hpp"

namespace emloc {

// Principal-branch exponential integral E1(c) = int_c^inf exp(-u)/u du for
// complex c off the negative real axis. Power series for |c| < 4, modified
// Lentz continued fraction otherwise; relative accuracy ~1e-13 over
// |c| in [1e-6, 1e4].
cdouble exp_integral_e1(cdouble c);

// Mutual impedance in ohms between y-aligned thin dipoles q and p.
// Self-impedance (same dipole) evaluates at lateral distance rho = a.
// Coaxial pairs (rho = 0) use numerical integration; overlapping coaxial
// dipoles are rejected.
cdouble mutual_impedance(const Dipole& q, const Dipole& p, double wavelength);

struct ImpedanceMatrix {
  CMatrix z;  // ohm
  std::string row_layout;
  std::string col_layout;
};

// Entry (i,j) = mutual_impedance(rows[i], cols[j]); the self branch applies
// only when rows and cols are the identical layout object and i == j.
ImpedanceMatrix impedance_matrix(const ElementLayout& rows, const ElementLayout& cols,
                                 double wavelength);

}  // namespace emloc
