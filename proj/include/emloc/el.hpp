#pragma once

#include <string>
#include <vector>

#include "emloc/channel.hpp"
#include "emloc/rng.hpp"
#include "emloc/signal_model.hpp"
#include "emloc/types.hpp"

namespace emloc {

// Likelihood ratio of X under covariance model R, in the per-snapshot
// LR^{1/T} form: det(B) exp(T) / exp(tr B) with B = X^* R^{-1} X / N.
// Valued in (0, 1]; requires the undersampled regime N > T.
double likelihood_ratio(const CMatrix& x, const CMatrix& r);

// Sorted Monte Carlo samples of LR(E | I_N) over unit-power AWGN draws;
// depends only on (N, T).
struct LRDistribution {
  std::vector<double> samples;  // ascending
  int n = 0;
  int t = 0;
  int n_draws = 0;
  std::uint64_t seed = 0;

  double mean() const;
  double min() const { return samples.front(); }
};

LRDistribution lr_reference_distribution(int n, int t, int n_draws, Rng& rng);

// Empirical p_beta-quantile: samples[min(n-1, floor(p*n))], so that
// prob{LR < beta} = p_beta on the sample set.
double lr_threshold(const LRDistribution& dist, double p_beta);

// cache file: magic "LRD1", u32 N, u32 T, u32 n_draws, u64 seed, then
// n_draws little-endian float64 sorted samples
void save_lr_distribution(const LRDistribution& dist, const std::string& path);
LRDistribution load_lr_distribution(const std::string& path);
// cache keyed by (N, T, n_draws, seed) under cache_dir; builds when missing
LRDistribution load_or_build_lr_distribution(const std::string& cache_dir, int n, int t,
                                             int n_draws, std::uint64_t seed);

enum class Reliability { Reliable, Outlier };

struct Classification {
  Reliability label = Reliability::Outlier;
  double lr_value = 0.0;
  double beta = 0.0;
};

// Reliable iff LR(X | R_mm) > beta (strict).
Classification classify_estimate(const CMatrix& x, const CMatrix& r_mm_at_estimate, double beta);

// Signal-based mismatch metric: mean over K true-model realizations of
// LR[X_k | R_MM(p)] divided by the reference-distribution mean.
double mismatch_metric_gamma(const CMatrix& h_true, const CMatrix& h_mm, const RVector& g_watts,
                             double sigma2_watt, int t, int k, double ref_mean, Rng& rng,
                             SymbolAlphabet alphabet = SymbolAlphabet::QPSK);

// One candidate assignment of M_hat peaks to sources.
struct PeakGrouping {
  std::vector<int> peak_indices;
  RVector g_hat;
  double lr = 0.0;
};

// All M_hat-subsets of the peaks, each scored by the LR of its mismatched
// covariance with re-estimated powers; sorted by LR descending.
std::vector<PeakGrouping> group_candidates(const std::vector<Vec3>& peak_positions, int m_hat,
                                           const CMatrix& x, const Manifold& mm,
                                           double sigma2_watt, int max_groupings = 100000);

}  // namespace emloc
