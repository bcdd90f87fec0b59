#include "emloc/optim.hpp"

#include <algorithm>
#include <cmath>

namespace emloc {

NelderMeadResult nelder_mead(const std::function<double(const RVector&)>& f, const RVector& x0,
                             const NelderMeadOptions& opts) {
  const int dim = static_cast<int>(x0.size());
  NelderMeadResult res;
  res.evals = 0;

  auto eval = [&](const RVector& x) {
    ++res.evals;
    return f(x);
  };

  std::vector<RVector> xs(dim + 1, x0);
  std::vector<double> fs(dim + 1);
  fs[0] = eval(x0);
  if (!std::isfinite(fs[0])) throw invalid_init_error("nelder_mead: objective not finite at x0");
  for (int i = 0; i < dim; ++i) {
    if (opts.initial_step > 0.0)
      xs[i + 1](i) += opts.initial_step;
    else  // 5% relative perturbation per coordinate (0.00025 at zero)
      xs[i + 1](i) = (x0(i) != 0.0) ? 1.05 * x0(i) : 0.00025;
    fs[i + 1] = eval(xs[i + 1]);
  }

  auto order = [&]() {
    std::vector<int> idx(dim + 1);
    for (int i = 0; i <= dim; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    std::vector<RVector> xs2(dim + 1);
    std::vector<double> fs2(dim + 1);
    for (int i = 0; i <= dim; ++i) {
      xs2[i] = xs[idx[i]];
      fs2[i] = fs[idx[i]];
    }
    xs.swap(xs2);
    fs.swap(fs2);
  };

  order();
  res.trace.push_back(fs[0]);

  while (res.evals < opts.max_evals) {
    double diam = 0.0;
    for (int i = 1; i <= dim; ++i) diam = std::max(diam, (xs[i] - xs[0]).norm());
    if (diam < opts.diameter_tol && std::abs(fs[dim] - fs[0]) < opts.fspread_tol) break;

    RVector centroid = RVector::Zero(dim);
    for (int i = 0; i < dim; ++i) centroid += xs[i];
    centroid /= dim;

    const RVector xr = centroid + (centroid - xs[dim]);
    const double fr = eval(xr);
    if (fr < fs[0]) {
      const RVector xe = centroid + 2.0 * (centroid - xs[dim]);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[dim] = xe;
        fs[dim] = fe;
      } else {
        xs[dim] = xr;
        fs[dim] = fr;
      }
    } else if (fr < fs[dim - 1]) {
      xs[dim] = xr;
      fs[dim] = fr;
    } else {
      const bool outside = fr < fs[dim];
      const RVector xc = outside ? RVector(centroid + 0.5 * (centroid - xs[dim]))
                                 : RVector(centroid - 0.5 * (centroid - xs[dim]));
      const double fc = eval(xc);
      if (fc < std::min(fr, fs[dim])) {
        xs[dim] = xc;
        fs[dim] = fc;
      } else {
        for (int i = 1; i <= dim; ++i) {
          xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
          fs[i] = eval(xs[i]);
        }
      }
    }
    order();
    res.trace.push_back(fs[0]);
  }

  res.x = xs[0];
  res.fx = fs[0];
  return res;
}

double golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                          double tol, int max_iters, double* fmin) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < max_iters && (b - a) > tol; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  const double xm = (fc < fd) ? c : d;
  if (fmin != nullptr) *fmin = std::min(fc, fd);
  return xm;
}

}  // namespace emloc
