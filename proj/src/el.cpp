#include "emloc/el.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "emloc/locate.hpp"

namespace emloc {

double likelihood_ratio(const CMatrix& x, const CMatrix& r) {
  const int n = static_cast<int>(x.rows());
  const int t = static_cast<int>(x.cols());
  if (n <= t)
    throw unsupported_regime_error("likelihood_ratio: requires the undersampled regime N > T");
  if (r.rows() != n || r.cols() != n)
    throw std::invalid_argument("likelihood_ratio: covariance size mismatch");

  Eigen::LLT<CMatrix> llt(r);
  if (llt.info() != Eigen::Success)
    throw singular_matrix_error("R (covariance model not positive definite)");
  // B = X^* R^{-1} X / N = W^* W / N with W = L^{-1} X
  const CMatrix w = llt.matrixL().solve(x);
  const CMatrix b = w.adjoint() * w / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<CMatrix> eig(b, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw std::runtime_error("likelihood_ratio: eigensolver failed");

  // prod_i lambda_i exp(1 - lambda_i), accumulated in the log domain
  double log_lr = 0.0;
  for (int i = 0; i < t; ++i) {
    const double lam = eig.eigenvalues()(i);
    if (!(lam > 0.0)) return 0.0;  // rank-deficient X
    log_lr += std::log(lam) + 1.0 - lam;
  }
  return std::min(1.0, std::exp(log_lr));
}

double LRDistribution::mean() const {
  if (samples.empty()) throw std::invalid_argument("empty LR distribution");
  return std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
}

LRDistribution lr_reference_distribution(int n, int t, int n_draws, Rng& rng) {
  if (n <= t) throw unsupported_regime_error("lr_reference_distribution: requires N > T");
  if (n_draws < 1) throw std::invalid_argument("n_draws must be >= 1");
  LRDistribution dist;
  dist.n = n;
  dist.t = t;
  dist.n_draws = n_draws;
  dist.seed = rng.seed_used();
  dist.samples.resize(n_draws);
  const CMatrix eye = CMatrix::Identity(n, n);
  CMatrix e(n, t);
  for (int d = 0; d < n_draws; ++d) {
    for (int j = 0; j < t; ++j)
      for (int i = 0; i < n; ++i) e(i, j) = rng.complex_normal(1.0);
    dist.samples[d] = likelihood_ratio(e, eye);
  }
  std::sort(dist.samples.begin(), dist.samples.end());
  return dist;
}

double lr_threshold(const LRDistribution& dist, double p_beta) {
  if (!(p_beta > 0.0 && p_beta < 1.0)) throw std::invalid_argument("p_beta must be in (0,1)");
  if (dist.samples.empty()) throw std::invalid_argument("empty LR distribution");
  const auto n = dist.samples.size();
  const size_t idx = std::min(n - 1, static_cast<size_t>(std::floor(p_beta * n)));
  return dist.samples[idx];
}

namespace {
constexpr char kCacheMagic[4] = {'L', 'R', 'D', '1'};
}

void save_lr_distribution(const LRDistribution& dist, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (fp == nullptr) throw std::runtime_error("cannot open " + path);
  const std::uint32_t n = dist.n, t = dist.t, draws = dist.n_draws;
  std::fwrite(kCacheMagic, 1, 4, fp);
  std::fwrite(&n, 4, 1, fp);
  std::fwrite(&t, 4, 1, fp);
  std::fwrite(&draws, 4, 1, fp);
  std::fwrite(&dist.seed, 8, 1, fp);
  std::fwrite(dist.samples.data(), 8, dist.samples.size(), fp);
  std::fclose(fp);
}

LRDistribution load_lr_distribution(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (fp == nullptr) throw std::runtime_error("cannot open " + path);
  char magic[4];
  std::uint32_t n = 0, t = 0, draws = 0;
  std::uint64_t seed = 0;
  bool ok = std::fread(magic, 1, 4, fp) == 4 && std::memcmp(magic, kCacheMagic, 4) == 0 &&
            std::fread(&n, 4, 1, fp) == 1 && std::fread(&t, 4, 1, fp) == 1 &&
            std::fread(&draws, 4, 1, fp) == 1 && std::fread(&seed, 8, 1, fp) == 1;
  LRDistribution dist;
  if (ok) {
    dist.n = n;
    dist.t = t;
    dist.n_draws = draws;
    dist.seed = seed;
    dist.samples.resize(draws);
    ok = std::fread(dist.samples.data(), 8, draws, fp) == draws;
  }
  std::fclose(fp);
  if (!ok) throw std::runtime_error("corrupt LR distribution cache: " + path);
  return dist;
}

LRDistribution load_or_build_lr_distribution(const std::string& cache_dir, int n, int t,
                                             int n_draws, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(cache_dir);
  char name[128];
  std::snprintf(name, sizeof(name), "lr_n%d_t%d_d%d_s%llu.bin", n, t, n_draws,
                static_cast<unsigned long long>(seed));
  const fs::path path = fs::path(cache_dir) / name;
  if (fs::exists(path)) {
    const auto dist = load_lr_distribution(path.string());
    if (dist.n == n && dist.t == t && dist.n_draws == n_draws && dist.seed == seed) return dist;
  }
  Rng rng(seed);
  auto dist = lr_reference_distribution(n, t, n_draws, rng);
  dist.seed = seed;
  save_lr_distribution(dist, path.string());
  return dist;
}

Classification classify_estimate(const CMatrix& x, const CMatrix& r_mm_at_estimate, double beta) {
  Classification c;
  c.lr_value = likelihood_ratio(x, r_mm_at_estimate);
  c.beta = beta;
  c.label = (c.lr_value > beta) ? Reliability::Reliable : Reliability::Outlier;
  return c;
}

double mismatch_metric_gamma(const CMatrix& h_true, const CMatrix& h_mm, const RVector& g_watts,
                             double sigma2_watt, int t, int k, double ref_mean, Rng& rng,
                             SymbolAlphabet alphabet) {
  if (k < 1) throw std::invalid_argument("mismatch_metric_gamma: K must be >= 1");
  if (!(ref_mean > 0.0)) throw std::invalid_argument("mismatch_metric_gamma: reference mean must be positive");
  const CMatrix r_mm = model_covariance(h_mm, g_watts, sigma2_watt);
  double acc = 0.0;
  for (int i = 0; i < k; ++i) {
    const auto snap = generate_received(h_true, g_watts, sigma2_watt, t, rng, alphabet);
    acc += likelihood_ratio(snap.x, r_mm);
  }
  return acc / k / ref_mean;
}

std::vector<PeakGrouping> group_candidates(const std::vector<Vec3>& peak_positions, int m_hat,
                                           const CMatrix& x, const Manifold& mm,
                                           double sigma2_watt, int max_groupings) {
  const int n_peaks = static_cast<int>(peak_positions.size());
  if (m_hat < 1 || n_peaks < m_hat)
    throw std::invalid_argument("group_candidates: need at least M_hat peaks");

  // C(n_peaks, m_hat) with overflow guard against the configured cap
  double count = 1.0;
  for (int i = 0; i < m_hat; ++i) count = count * (n_peaks - i) / (i + 1);
  if (count > static_cast<double>(max_groupings))
    throw std::invalid_argument(
        "group_candidates: too many peak subsets; reduce the search grid or raise the cap");

  const CMatrix r_hat = sample_covariance(x);
  std::vector<PeakGrouping> out;
  std::vector<int> idx(m_hat);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    PeakGrouping grouping;
    grouping.peak_indices = idx;
    std::vector<Vec3> pos;
    pos.reserve(m_hat);
    for (int i : idx) pos.push_back(peak_positions[i]);
    const CMatrix h = mm.matrix(pos);
    grouping.g_hat = estimate_powers(h, r_hat, sigma2_watt);
    grouping.lr = likelihood_ratio(x, model_covariance(h, grouping.g_hat, sigma2_watt));
    out.push_back(std::move(grouping));

    // next combination in lexicographic order
    int i = m_hat - 1;
    while (i >= 0 && idx[i] == n_peaks - m_hat + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < m_hat; ++j) idx[j] = idx[j - 1] + 1;
  }
  std::sort(out.begin(), out.end(),
            [](const PeakGrouping& a, const PeakGrouping& b) { return a.lr > b.lr; });
  return out;
}

}  // namespace emloc
