#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace emloc::testing {

namespace {

// 40-point Gauss-Legendre nodes/weights on [-1,1], generated by Newton
// iteration on the Legendre recurrence at startup.
struct GaussLegendre40 {
  double x[40];
  double w[40];
  GaussLegendre40() {
    const int n = 40;
    for (int i = 0; i < n; ++i) {
      double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = xi;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        const double dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
        const double step = p1 / dp;
        xi -= step;
        if (std::abs(step) < 1e-16) {
          double q0 = 1.0, q1 = xi;
          for (int k = 2; k <= n; ++k) {
            const double q2 = ((2 * k - 1) * xi * q1 - (k - 1) * q0) / k;
            q0 = q1;
            q1 = q2;
          }
          const double dq = n * (xi * q1 - q0) / (xi * xi - 1.0);
          x[i] = xi;
          w[i] = 2.0 / ((1.0 - xi * xi) * dq * dq);
          break;
        }
      }
    }
  }
};

const GaussLegendre40& gl40() {
  static const GaussLegendre40 rule;
  return rule;
}

template <typename F>
cdouble gl40_integrate(const F& f, double a, double b) {
  const auto& r = gl40();
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  cdouble acc = 0.0;
  for (int i = 0; i < 40; ++i) acc += r.w[i] * f(c + h * r.x[i]);
  return acc * h;
}

}  // namespace

cdouble e1_quadrature_oracle(cdouble c) {
  // exp(-c) * int_0^inf exp(-t) / (t + c) dt over geometrically refined
  // panels; the tail beyond t = 60 is below 1e-28 of the head.
  const double m = std::abs(c);
  std::vector<double> cuts;
  cuts.push_back(0.0);
  // resolve the 1/(t+c) scale near t = 0 when |c| is small
  double lo = std::min(1e-8, m * 1e-3);
  if (m < 1.0) {
    for (double t = lo; t < 1.0; t *= 4.0) cuts.push_back(t);
  }
  for (double t = 1.0; t <= 60.0; t += 1.5) cuts.push_back(t);
  cuts.push_back(60.0);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  cdouble acc = 0.0;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    acc += gl40_integrate([&](double t) { return std::exp(-t) / (t + c); }, cuts[i], cuts[i + 1]);
  }
  return std::exp(-c) * acc;
}

cdouble emf_mutual_impedance_oracle(const Dipole& q, const Dipole& p, double wavelength) {
  const double k = 2.0 * M_PI / wavelength;
  const double hq = q.half_length, hp = p.half_length;
  const double yqp = q.position.y() - p.position.y();
  const double dx = q.position.x() - p.position.x();
  const double dz = q.position.z() - p.position.z();
  const bool self = (dx == 0.0 && dz == 0.0 && yqp == 0.0);
  const double rho = self ? q.radius : std::hypot(dx, dz);

  // E-field of dipole p (unit current maximum, sinusoidal distribution)
  // at lateral distance rho and height y above p's centre, dotted with the
  // current on q; referred to terminal currents via sin(k hp) sin(k hq).
  auto integrand = [&](double y) -> cdouble {
    const double w = y + yqp;
    const double r1 = std::hypot(rho, w - hp);
    const double r2 = std::hypot(rho, w + hp);
    const double r0 = std::hypot(rho, w);
    const cdouble field = std::exp(cdouble(0.0, -k * r1)) / r1 +
                          std::exp(cdouble(0.0, -k * r2)) / r2 -
                          2.0 * std::cos(k * hp) * std::exp(cdouble(0.0, -k * r0)) / r0;
    return field * std::sin(k * (hq - std::abs(y)));
  };

  // many small panels; the integrand oscillates on the wavelength scale and
  // varies fast near y = -yqp when rho is small
  const int panels = 400;
  cdouble acc = 0.0;
  for (int side = 0; side < 2; ++side) {
    const double a = (side == 0) ? -hq : 0.0;
    const double b = (side == 0) ? 0.0 : hq;
    for (int i = 0; i < panels; ++i) {
      const double t0 = a + (b - a) * i / panels;
      const double t1 = a + (b - a) * (i + 1) / panels;
      acc += gl40_integrate(integrand, t0, t1);
    }
  }
  const cdouble j(0.0, 1.0);
  return j * kFreeSpaceImpedance / (4.0 * M_PI * std::sin(k * hp) * std::sin(k * hq)) * acc;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

}  // namespace emloc::testing
