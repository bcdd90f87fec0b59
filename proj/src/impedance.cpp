#include "emloc/impedance.hpp"

#include <cmath>

namespace emloc {

namespace {

constexpr double kEulerGamma = 0.5772156649015328606;

cdouble e1_series(cdouble z) {
  // E1(z) = -gamma - log z + sum_{n>=1} (-1)^{n+1} z^n / (n * n!)
  cdouble sum = 0.0;
  cdouble term = 1.0;  // z^n / n!
  for (int n = 1; n <= 64; ++n) {
    term *= z / static_cast<double>(n);
    const cdouble add = term / static_cast<double>(n);
    sum += (n % 2 == 1) ? add : -add;
    if (std::abs(add) < 1e-18 * (1.0 + std::abs(sum))) break;
  }
  return -kEulerGamma - std::log(z) + sum;
}

cdouble e1_continued_fraction(cdouble z) {
  // E1(z) = exp(-z) * 1/(z + 1/(1 + 1/(z + 2/(1 + 2/(z + ...))))), evaluated
  // with the modified Lentz algorithm.
  const double tiny = 1e-290;
  cdouble b = z + 1.0;
  cdouble c = 1.0 / tiny;
  cdouble d = 1.0 / b;
  cdouble h = d;
  for (int i = 1; i <= 2000; ++i) {
    const double a = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (a * d + b);
    c = b + a / c;
    const cdouble delta = c * d;
    h *= delta;
    if (std::abs(delta - 1.0) < 3e-16) return std::exp(-z) * h;
  }
  return std::exp(-z) * h;  // slow convergence near the negative real axis
}

struct DipolePairGeometry {
  double hq, hp;   // half-lengths, m
  double rho;      // lateral distance in the x,z-plane, m
  double yqp;      // y_q - y_p, m
  double k;        // wavenumber 2*pi/lambda
};

// sqrt(d0^2 + w^2) + s0*w, with the cancellation-prone case rewritten as
// d0^2 / (sqrt(d0^2 + w^2) - s0*w)
double stable_ray_length(double d0, double w, double s0) {
  const double r = std::hypot(d0, w);
  const double sw = s0 * w;
  return (sw < 0.0) ? (d0 * d0) / (r - sw) : r + sw;
}

// J(s0, d0, y0; L, U) = s0 exp(-j k s0 y0) [E1(j k L0) - E1(j k U0)]
cdouble eval_j_term(double s0, double d0, double y0, double lo, double up, double k) {
  const double l0 = stable_ray_length(d0, lo - y0, s0);
  const double u0 = stable_ray_length(d0, up - y0, s0);
  const cdouble jk(0.0, k);
  const cdouble e_lo = exp_integral_e1(jk * l0);
  const cdouble e_up = exp_integral_e1(jk * u0);
  return s0 * std::exp(cdouble(0.0, -k * s0 * y0)) * (e_lo - e_up);
}

// I_qp(xi_p; s0) via the E1 form, valid for rho > 0.
cdouble eval_iqp(const DipolePairGeometry& g, double xi_p, double s0) {
  const double y0 = xi_p - g.yqp;
  return eval_j_term(-s0, g.rho, y0, -g.hq, 0.0, g.k) +
         eval_j_term(+s0, g.rho, y0, 0.0, +g.hq, g.k);
}

// Adaptive Gauss-Kronrod (G7,K15) on [a,b] for a complex integrand.
template <typename F>
cdouble gauss_kronrod_15(const F& f, double a, double b, double& err) {
  static const double xk[8] = {0.0,
                               0.2077849550078985,
                               0.4058451513773972,
                               0.5860872354676911,
                               0.7415311855993944,
                               0.8648644233597691,
                               0.9491079123427585,
                               0.9914553711208126};
  static const double wk[8] = {0.2094821410847278, 0.2044329400752989, 0.1903505780647854,
                               0.1690047266392679, 0.1406532597155259, 0.1047900103222502,
                               0.0630920926299785, 0.0229353220105292};
  static const double wg[4] = {0.4179591836734694, 0.3818300505051189, 0.2797053914892767,
                               0.1294849661688697};
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  cdouble resk = 0.0, resg = 0.0;
  const cdouble f0 = f(c);
  resk += wk[0] * f0;
  resg += wg[0] * f0;
  for (int i = 1; i < 8; ++i) {
    const cdouble f1 = f(c - h * xk[i]);
    const cdouble f2 = f(c + h * xk[i]);
    resk += wk[i] * (f1 + f2);
    if (i % 2 == 0) resg += wg[i / 2] * (f1 + f2);
  }
  err = std::abs(resk - resg) * std::abs(h);
  return resk * h;
}

template <typename F>
cdouble adaptive_quadrature(const F& f, double a, double b, double abs_tol, int depth = 0) {
  double err = 0.0;
  const cdouble val = gauss_kronrod_15(f, a, b, err);
  if (err <= abs_tol || depth >= 48) return val;
  const double m = 0.5 * (a + b);
  return adaptive_quadrature(f, a, m, abs_tol / 2, depth + 1) +
         adaptive_quadrature(f, m, b, abs_tol / 2, depth + 1);
}

// Coaxial branch (rho = 0). Individual I_qp terms diverge logarithmically when
// a dipole tip touches the integration boundary (tip-to-tip elements at
// half-wavelength spacing), but the full three-term combination stays finite
// because the sinusoidal weight vanishes at the tips. Integrate the combined
// form: Z = j eta c_q / (4 pi) * int_{-hq}^{hq} [G(+hp) + G(-hp)
//   - 2 cos(k hp) G(0)] sin(k (hq - |y|)) dy,  G(xi) = exp(-jk r)/r,
//   r = |y + yqp - xi|.
cdouble coaxial_impedance(const DipolePairGeometry& g, double cq) {
  const double k = g.k;
  const double gap = std::abs(g.yqp) - (g.hq + g.hp);
  if (gap < -1e-9 * (g.hq + g.hp))
    throw unsupported_geometry_error("overlapping coaxial dipoles");

  const double coef0 = 2.0 * std::cos(k * g.hp);
  auto integrand = [&](double y) -> cdouble {
    auto green = [&](double xi) -> cdouble {
      const double r = std::abs(y + g.yqp - xi);
      return std::exp(cdouble(0.0, -k * r)) / r;
    };
    const cdouble field = green(+g.hp) + green(-g.hp) - coef0 * green(0.0);
    return field * std::sin(k * (g.hq - std::abs(y)));
  };

  // split at the current kink (y = 0) and near any tip-touching endpoint
  const cdouble integral = adaptive_quadrature(integrand, -g.hq, 0.0, 0.5e-9) +
                           adaptive_quadrature(integrand, 0.0, g.hq, 0.5e-9);
  return cdouble(0.0, 1.0) * kFreeSpaceImpedance * cq / (4.0 * M_PI) * integral;
}

}  // namespace

cdouble exp_integral_e1(cdouble c) {
  if (c == cdouble(0.0, 0.0))
    throw std::domain_error("exp_integral_e1: logarithmic singularity at c = 0");
  if (c.imag() == 0.0 && c.real() < 0.0)
    throw std::domain_error("exp_integral_e1: branch cut on the negative real axis");
  return (std::abs(c) < 4.0) ? e1_series(c) : e1_continued_fraction(c);
}

cdouble mutual_impedance(const Dipole& q, const Dipole& p, double wavelength) {
  if (!(wavelength > 0.0)) throw std::invalid_argument("wavelength must be positive");

  DipolePairGeometry g;
  g.k = 2.0 * M_PI / wavelength;
  g.hq = q.half_length;
  g.hp = p.half_length;
  g.yqp = q.position.y() - p.position.y();
  const double dx = q.position.x() - p.position.x();
  const double dz = q.position.z() - p.position.z();
  const bool self = (dx == 0.0 && dz == 0.0 && g.yqp == 0.0);
  g.rho = self ? q.radius : std::hypot(dx, dz);

  // Terminal-current normalization 1/(sin(k h_q) sin(k h_p)); this keeps
  // Z_qp = Z_pq for unequal half-lengths and matches the induced-EMF value.
  // For half-wave dipoles both sines are 1.
  const double sq = std::sin(g.k * g.hq);
  const double sp = std::sin(g.k * g.hp);
  if (std::abs(sq) < 1e-12 || std::abs(sp) < 1e-12)
    throw std::invalid_argument("dipole at current-null resonance (sin(k h) = 0)");
  const double cq = 1.0 / (sq * sp);

  if (g.rho == 0.0) return coaxial_impedance(g, cq);

  const double cqp = 2.0 * std::cos(g.k * g.hp) * cq;
  const double scale = kFreeSpaceImpedance / (8.0 * M_PI);
  cdouble z = 0.0;
  for (double s0 : {-1.0, +1.0}) {
    const cdouble w = s0 * std::exp(cdouble(0.0, s0 * g.k * g.hq));
    z += scale * w *
         (cq * (eval_iqp(g, +g.hp, s0) + eval_iqp(g, -g.hp, s0)) - cqp * eval_iqp(g, 0.0, s0));
  }
  return z;
}

ImpedanceMatrix impedance_matrix(const ElementLayout& rows, const ElementLayout& cols,
                                 double wavelength) {
  if (rows.elements.empty() || cols.elements.empty())
    throw std::invalid_argument("impedance_matrix: layouts must be non-empty");
  const bool same = (&rows == &cols);
  ImpedanceMatrix out;
  out.row_layout = rows.name;
  out.col_layout = cols.name;
  out.z.resize(rows.size(), cols.size());
  for (int i = 0; i < rows.size(); ++i) {
    const int j0 = same ? i : 0;
    for (int j = j0; j < cols.size(); ++j) {
      out.z(i, j) = mutual_impedance(rows.elements[i], cols.elements[j], wavelength);
      if (same && j != i) out.z(j, i) = out.z(i, j);
    }
  }
  return out;
}

}  // namespace emloc
