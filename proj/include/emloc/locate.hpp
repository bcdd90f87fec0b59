#pragma once

#include <optional>
#include <vector>

#include "emloc/channel.hpp"
#include "emloc/el.hpp"
#include "emloc/optim.hpp"
#include "emloc/types.hpp"

namespace emloc {

// Planar search grid in the x,z-plane at fixed y (the known source plane):
// nx * nz cell centres inside the area, half a cell clear of the boundary.
struct SearchGrid {
  double x_lo = 0.0, x_hi = 0.0;
  double z_lo = 0.0, z_hi = 0.0;
  int nx = 0, nz = 0;
  double y = 0.0;

  double x_at(int ix) const { return x_lo + (x_hi - x_lo) * (ix + 0.5) / nx; }
  double z_at(int iz) const { return z_lo + (z_hi - z_lo) * (iz + 0.5) / nz; }
  Vec3 point(int ix, int iz) const { return Vec3(x_at(ix), y, z_at(iz)); }
  double cell_x() const { return (x_hi - x_lo) / nx; }
  double cell_z() const { return (z_hi - z_lo) / nz; }
  void validate() const;

  static SearchGrid centered(double cx, double cz, double span_x, double span_z, int nx, int nz,
                             double y);
};

struct LocalizationResult {
  std::vector<Vec3> p_hat;
  RVector g_hat;             // linear watts, >= 0
  int m_hat = 0;
  double lr_value = 0.0;
  std::optional<Classification> classification;
  std::vector<double> objective_trace;
  double objective = 0.0;
  bool refined_from_outlier = false;  // finer-grid remediation was applied
  bool peaks_flagged = false;         // fewer local maxima than M_hat
};

// Source-count detection: MDL over the eigenvalues of the T x T Gram matrix
// X^* X / N (the undersampled form with N and T in swapped roles).
int estimate_num_sources_mdl(const CMatrix& x);

// MUSIC spectrum values over the grid; values(ix, iz) with flat index
// ix * nz + iz for tie ordering.
RMatrix music_spectrum(const CMatrix& r_hat, int m_hat, const SearchGrid& grid,
                       const Manifold& mm);

// Up to m_hat largest 8-neighbourhood local maxima; ties resolved by value,
// then lowest flat grid index. `flagged` set when fewer maxima exist.
std::vector<Vec3> music_peaks(const RMatrix& spectrum, const SearchGrid& grid, int m_hat,
                              bool* flagged = nullptr);

// G_hat = max(diag(H^+ (R_hat - sigma2 I) H^{+*}), 0)
RVector estimate_powers(const CMatrix& h_mm, const CMatrix& r_hat, double sigma2_watt);

struct MlRefineOptions {
  double initial_step = 0.0;   // <= 0: 5% relative initial simplex
  double diameter_tol = 1e-4;  // vertex-spread stopping tolerance, m
  double fspread_tol = 1e-4;   // objective-spread stopping tolerance
  int max_evals = 0;           // <= 0: 200 per free coordinate
  // re-estimate powers at every objective evaluation; when false the powers
  // estimated at the initialization stay fixed through the search
  bool reestimate_powers = true;
};

// Stochastic ML refinement of the 2 M_hat free coordinates (x_m, z_m),
// minimizing log det R_MM(P) + tr(R_MM^{-1}(P) R_hat) with powers
// re-estimated at every evaluation.
LocalizationResult ml_refine(const CMatrix& r_hat, const std::vector<Vec3>& p_init,
                             const Manifold& mm, double sigma2_watt,
                             const MlRefineOptions& opts);

struct LocalizeOptions {
  double p_beta = 0.01;
  bool refine_outliers = true;  // re-run outliers from a finer MUSIC grid
  int refine_nx = 50;
  int refine_nz = 50;
  MlRefineOptions ml;
};

// Full pipeline: MDL -> MUSIC -> ML -> LR classification against the
// reference distribution, with optional finer-grid outlier remediation.
LocalizationResult localize(const CMatrix& x, const Manifold& mm, const SearchGrid& grid,
                            double sigma2_watt, const LRDistribution& ref,
                            const LocalizeOptions& opts);

}  // namespace emloc
