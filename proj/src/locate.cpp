#include "emloc/locate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace emloc {

void SearchGrid::validate() const {
  if (nx < 2 || nz < 2) throw std::invalid_argument("search grid needs nx, nz >= 2");
  if (!(x_hi > x_lo) || !(z_hi > z_lo)) throw std::invalid_argument("degenerate search grid range");
}

SearchGrid SearchGrid::centered(double cx, double cz, double span_x, double span_z, int nx,
                                int nz, double y) {
  SearchGrid g;
  g.x_lo = cx - span_x / 2.0;
  g.x_hi = cx + span_x / 2.0;
  g.z_lo = cz - span_z / 2.0;
  g.z_hi = cz + span_z / 2.0;
  g.nx = nx;
  g.nz = nz;
  g.y = y;
  g.validate();
  return g;
}

int estimate_num_sources_mdl(const CMatrix& x) {
  const int n = static_cast<int>(x.rows());
  const int t = static_cast<int>(x.cols());
  if (t < 2) throw std::invalid_argument("estimate_num_sources_mdl: needs T >= 2");

  const CMatrix gram = x.adjoint() * x / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
  RVector ev = eig.eigenvalues().reverse();  // descending
  const double floor_val = std::max(ev(0), 1e-300) * 1e-15;
  for (int i = 0; i < t; ++i) ev(i) = std::max(ev(i), floor_val);

  // classical eigenvalue MDL with T sensors and N snapshots
  int best_k = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < t; ++k) {
    const int d = t - k;
    double log_gm = 0.0, am = 0.0;
    for (int i = k; i < t; ++i) {
      log_gm += std::log(ev(i));
      am += ev(i);
    }
    log_gm /= d;
    am /= d;
    const double value = -static_cast<double>(n) * d * (log_gm - std::log(am)) +
                         0.5 * k * (2.0 * t - k) * std::log(static_cast<double>(n));
    if (value < best) {
      best = value;
      best_k = k;
    }
  }
  return best_k;
}

RMatrix music_spectrum(const CMatrix& r_hat, int m_hat, const SearchGrid& grid,
                       const Manifold& mm) {
  grid.validate();
  const int n = static_cast<int>(r_hat.rows());
  if (m_hat < 1 || m_hat >= n) throw std::invalid_argument("music_spectrum: need 1 <= M_hat < N");

  Eigen::SelfAdjointEigenSolver<CMatrix> eig(r_hat);
  if (eig.info() != Eigen::Success) throw std::runtime_error("music_spectrum: eigensolver failed");
  // eigenvalues ascending: first N - M_hat vectors span the noise subspace
  const CMatrix vn = eig.eigenvectors().leftCols(n - m_hat);

  RMatrix values(grid.nx, grid.nz);
  for (int ix = 0; ix < grid.nx; ++ix) {
    for (int iz = 0; iz < grid.nz; ++iz) {
      const CVector h = mm.vector(grid.point(ix, iz));
      values(ix, iz) = 1.0 / (vn.adjoint() * h).squaredNorm();
    }
  }
  return values;
}

std::vector<Vec3> music_peaks(const RMatrix& spectrum, const SearchGrid& grid, int m_hat,
                              bool* flagged) {
  // +inf cells (exact noise-free nulls) are legal peak candidates, NaN is not
  for (int i = 0; i < spectrum.size(); ++i)
    if (std::isnan(spectrum.data()[i]))
      throw std::invalid_argument("music_peaks: spectrum has NaN entries");
  const int nx = static_cast<int>(spectrum.rows());
  const int nz = static_cast<int>(spectrum.cols());

  struct Candidate {
    double value;
    int ix, iz;
    int nz_;
    int flat() const { return ix * nz_ + iz; }
  };
  std::vector<Candidate> candidates;
  for (int ix = 0; ix < nx; ++ix) {
    for (int iz = 0; iz < nz; ++iz) {
      const double v = spectrum(ix, iz);
      bool is_max = true;
      for (int dx = -1; dx <= 1 && is_max; ++dx)
        for (int dz = -1; dz <= 1 && is_max; ++dz) {
          if (dx == 0 && dz == 0) continue;
          const int jx = ix + dx, jz = iz + dz;
          if (jx < 0 || jx >= nx || jz < 0 || jz >= nz) continue;
          if (spectrum(jx, jz) > v) is_max = false;
        }
      if (is_max) candidates.push_back({v, ix, iz, nz});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.flat() < b.flat();
  });

  // plateau dedupe: drop candidates 8-adjacent to an already accepted
  // equal-valued candidate (the lowest flat index survives)
  std::vector<Candidate> accepted;
  for (const auto& c : candidates) {
    bool dup = false;
    for (const auto& a : accepted)
      if (a.value == c.value && std::abs(a.ix - c.ix) <= 1 && std::abs(a.iz - c.iz) <= 1) {
        dup = true;
        break;
      }
    if (!dup) accepted.push_back(c);
    if (static_cast<int>(accepted.size()) == m_hat) break;
  }

  if (flagged != nullptr) *flagged = static_cast<int>(accepted.size()) < m_hat;
  std::vector<Vec3> peaks;
  peaks.reserve(accepted.size());
  for (const auto& a : accepted) peaks.push_back(grid.point(a.ix, a.iz));
  return peaks;
}

RVector estimate_powers(const CMatrix& h_mm, const CMatrix& r_hat, double sigma2_watt) {
  const int n = static_cast<int>(h_mm.rows());
  const int m = static_cast<int>(h_mm.cols());
  Eigen::JacobiSVD<CMatrix> svd(h_mm, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  if (!(smax > 0.0) || svd.singularValues()(m - 1) < 1e-12 * smax)
    throw singular_matrix_error("H_MM (rank-deficient manifold matrix)");

  // B = H^+ (R_hat - sigma2 I) H^{+*}
  CMatrix pinv(m, n);
  pinv = svd.matrixV() * svd.singularValues().cwiseInverse().asDiagonal() * svd.matrixU().adjoint();
  CMatrix centered = r_hat;
  centered.diagonal().array() -= sigma2_watt;
  const CMatrix b = pinv * centered * pinv.adjoint();
  return b.diagonal().real().cwiseMax(0.0);
}

namespace {

// log det R + tr(R^{-1} R_hat) for R = H G H^* + sigma2 I; G re-estimated
// unless a fixed power vector is supplied
double ml_objective(const CMatrix& r_hat, const Manifold& mm, const std::vector<Vec3>& pos,
                    double sigma2, RVector* g_out, const RVector* g_fixed = nullptr) {
  const CMatrix h = mm.matrix(pos);
  RVector g;
  try {
    g = (g_fixed != nullptr) ? *g_fixed : estimate_powers(h, r_hat, sigma2);
  } catch (const singular_matrix_error&) {
    return std::numeric_limits<double>::infinity();  // coincident candidate positions
  }
  CMatrix r = model_covariance(h, g, sigma2);
  Eigen::LLT<CMatrix> llt(r);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  double logdet = 0.0;
  for (int i = 0; i < r.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i).real());
  const double trace = llt.solve(r_hat).trace().real();
  if (g_out != nullptr) *g_out = g;
  return logdet + trace;
}

}  // namespace

LocalizationResult ml_refine(const CMatrix& r_hat, const std::vector<Vec3>& p_init,
                             const Manifold& mm, double sigma2_watt,
                             const MlRefineOptions& opts) {
  if (p_init.empty()) throw std::invalid_argument("ml_refine: empty initialization");
  const int m = static_cast<int>(p_init.size());
  const double y_plane = p_init.front().y();

  auto unpack = [&](const RVector& v) {
    std::vector<Vec3> pos(m);
    for (int i = 0; i < m; ++i) pos[i] = Vec3(v(2 * i), y_plane, v(2 * i + 1));
    return pos;
  };
  RVector g_init;
  const bool fixed = !opts.reestimate_powers;
  if (fixed) {
    try {
      g_init = estimate_powers(mm.matrix(p_init), r_hat, sigma2_watt);
    } catch (const singular_matrix_error&) {
      throw invalid_init_error("ml_refine: power estimation failed at the initialization");
    }
  }
  auto objective = [&](const RVector& v) {
    return ml_objective(r_hat, mm, unpack(v), sigma2_watt, nullptr, fixed ? &g_init : nullptr);
  };

  RVector x0(2 * m);
  for (int i = 0; i < m; ++i) {
    x0(2 * i) = p_init[i].x();
    x0(2 * i + 1) = p_init[i].z();
  }

  NelderMeadOptions nm;
  nm.initial_step = opts.initial_step;  // <= 0: fminsearch-style 5% relative simplex
  nm.diameter_tol = opts.diameter_tol;
  nm.fspread_tol = opts.fspread_tol;
  nm.max_evals = opts.max_evals > 0 ? opts.max_evals : 200 * 2 * m;
  const auto nmres = nelder_mead(objective, x0, nm);

  LocalizationResult res;
  res.p_hat = unpack(nmres.x);
  res.m_hat = m;
  // final powers always follow the pseudoinverse estimate at the solution
  res.objective = ml_objective(r_hat, mm, res.p_hat, sigma2_watt, &res.g_hat);
  res.objective_trace = nmres.trace;
  return res;
}

LocalizationResult localize(const CMatrix& x, const Manifold& mm, const SearchGrid& grid,
                            double sigma2_watt, const LRDistribution& ref,
                            const LocalizeOptions& opts) {
  grid.validate();
  const int m_hat = estimate_num_sources_mdl(x);
  if (m_hat == 0) {
    LocalizationResult empty;
    empty.m_hat = 0;
    return empty;
  }

  const CMatrix r_hat = sample_covariance(x);
  const double beta = lr_threshold(ref, opts.p_beta);

  auto run_from_grid = [&](const SearchGrid& g) {
    const RMatrix spectrum = music_spectrum(r_hat, m_hat, g, mm);
    bool flagged = false;
    const auto peaks = music_peaks(spectrum, g, m_hat, &flagged);
    LocalizationResult r = ml_refine(r_hat, peaks, mm, sigma2_watt, opts.ml);
    r.peaks_flagged = flagged;
    const CMatrix h = mm.matrix(r.p_hat);
    r.classification = classify_estimate(x, model_covariance(h, r.g_hat, sigma2_watt), beta);
    r.lr_value = r.classification->lr_value;
    return r;
  };

  LocalizationResult res = run_from_grid(grid);
  if (opts.refine_outliers && res.classification &&
      res.classification->label == Reliability::Outlier) {
    SearchGrid fine = grid;
    fine.nx = opts.refine_nx;
    fine.nz = opts.refine_nz;
    LocalizationResult res2 = run_from_grid(fine);
    res2.refined_from_outlier = true;
    if (res2.lr_value > res.lr_value) return res2;
    res.refined_from_outlier = true;
  }
  return res;
}

}  // namespace emloc
