#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "emloc/el.hpp"
#include "emloc/geometry.hpp"
#include "oracles.hpp"

using namespace emloc;

namespace {
CMatrix random_gaussian(int n, int t, Rng& rng) {
  CMatrix e(n, t);
  for (int j = 0; j < t; ++j)
    for (int i = 0; i < n; ++i) e(i, j) = rng.complex_normal(1.0);
  return e;
}
}  // namespace

TEST_CASE("LR is exactly one when B is the identity") {
  const int n = 16, t = 4;
  // X = sqrt(N) * (orthonormal columns) makes X^* X / N = I_T
  Rng rng(3);
  const CMatrix e = random_gaussian(n, t, rng);
  Eigen::HouseholderQR<CMatrix> qr(e);
  const CMatrix q = CMatrix(qr.householderQ()).leftCols(t);
  const CMatrix x = std::sqrt(static_cast<double>(n)) * q;
  CHECK(likelihood_ratio(x, CMatrix::Identity(n, n)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("LR lies in (0,1] for random draws") {
  const int n = 24, t = 6;
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const double lr = likelihood_ratio(random_gaussian(n, t, rng), CMatrix::Identity(n, n));
    CHECK(lr > 0.0);
    CHECK(lr <= 1.0);
  }
}

TEST_CASE("typical LR values for N=64, T=10 sit between 0.35 and 0.55") {
  const int n = 64, t = 10;
  Rng rng(123);
  std::vector<double> vals(200);
  for (auto& v : vals) v = likelihood_ratio(random_gaussian(n, t, rng), CMatrix::Identity(n, n));
  std::sort(vals.begin(), vals.end());
  const double median = vals[vals.size() / 2];
  CHECK(median > 0.35);
  CHECK(median < 0.55);
}

TEST_CASE("LR invariances") {
  const int n = 20, t = 5;
  Rng rng(29);
  const CMatrix x = random_gaussian(n, t, rng);
  CMatrix r = CMatrix::Identity(n, n);
  r(0, 0) = 3.0;  // any valid covariance

  const double base = likelihood_ratio(x, r);
  const cdouble phase = std::exp(cdouble(0.0, 1.234));
  CHECK(likelihood_ratio(phase * x, r) == doctest::Approx(base).epsilon(1e-12));

  const cdouble c(0.7, -1.1);
  CHECK(likelihood_ratio(c * x, std::norm(c) * r) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("LR regime and singularity errors") {
  Rng rng(5);
  CHECK_THROWS_AS(likelihood_ratio(random_gaussian(4, 6, rng), CMatrix::Identity(4, 4)),
                  unsupported_regime_error);
  const CMatrix x = random_gaussian(6, 2, rng);
  CHECK_THROWS_AS(likelihood_ratio(x, CMatrix::Zero(6, 6)), singular_matrix_error);
}

TEST_CASE("reference distribution and threshold for N=64, T=10") {
  Rng rng(99);
  const auto dist = lr_reference_distribution(64, 10, 10000, rng);
  CHECK(std::is_sorted(dist.samples.begin(), dist.samples.end()));
  CHECK(dist.samples.front() > 0.0);
  CHECK(dist.samples.back() <= 1.0);

  const double beta = lr_threshold(dist, 0.01);
  CHECK(beta == doctest::Approx(0.32).epsilon(0.1));  // paper's operating point

  // threshold semantics
  CHECK(lr_threshold(dist, 1e-9) == dist.samples.front());
  CHECK(lr_threshold(dist, 0.5) == dist.samples[5000]);
  CHECK(lr_threshold(dist, 0.2) <= lr_threshold(dist, 0.4));
  CHECK_THROWS_AS(lr_threshold(dist, 0.0), std::invalid_argument);

  // single-draw degenerate distribution
  Rng rng1(100);
  const auto one = lr_reference_distribution(64, 10, 1, rng1);
  CHECK(one.samples.size() == 1);
  CHECK(lr_threshold(one, 0.3) == one.samples[0]);
}

TEST_CASE("scenario independence: whitened true-covariance draws match the AWGN reference") {
  const int n = 64, t = 10, draws = 1000;
  Rng rng(424242);

  std::vector<double> awgn(draws), scenario(draws);
  for (auto& v : awgn) v = likelihood_ratio(random_gaussian(n, t, rng), CMatrix::Identity(n, n));

  // arbitrary covariance R0: X = L E ~ CN(0, R0), scored against R0 itself
  CMatrix a = random_gaussian(n, n, rng);
  CMatrix r0 = (a * a.adjoint() / n + 0.5 * CMatrix::Identity(n, n));
  r0 = ((r0 + r0.adjoint()) / 2.0).eval();
  Eigen::LLT<CMatrix> llt(r0);
  REQUIRE(llt.info() == Eigen::Success);
  const CMatrix l = llt.matrixL();
  for (auto& v : scenario) v = likelihood_ratio(l * random_gaussian(n, t, rng), r0);

  const double d = emloc::testing::ks_statistic(awgn, scenario);
  const double crit = 1.6276 * std::sqrt(2.0 / draws);  // KS at the 1% level
  CHECK(d < crit);
}

TEST_CASE("classification against the threshold") {
  const int n = 16, t = 4;
  Rng rng(8);
  const CMatrix x = random_gaussian(n, t, rng);
  const CMatrix eye = CMatrix::Identity(n, n);
  const double lr = likelihood_ratio(x, eye);

  CHECK(classify_estimate(x, eye, lr * 0.5).label == Reliability::Reliable);
  CHECK(classify_estimate(x, eye, lr * 2.0).label == Reliability::Outlier);
  // boundary: LR exactly equal to beta classifies as outlier
  CHECK(classify_estimate(x, eye, lr).label == Reliability::Outlier);
  const auto c = classify_estimate(x, eye, 0.32);
  CHECK(c.lr_value == doctest::Approx(lr));
  CHECK(c.beta == 0.32);
  CHECK((c.label == Reliability::Reliable) == (c.lr_value > c.beta));
}

TEST_CASE("mismatch metric is near one for the true model and small under mismatch") {
  const int n = 32, t = 8, k = 200;
  Rng ref_rng(1000);
  const auto ref = lr_reference_distribution(n, t, 4000, ref_rng);
  const double ref_mean = ref.mean();

  Rng rng(2000);
  CVector h(n);
  for (int i = 0; i < n; ++i) h(i) = rng.complex_normal(1.0);
  const double sigma2 = 0.05;
  const RVector g = RVector::Constant(1, 1.0);

  Rng data_rng(3000);
  const double gamma_tm =
      mismatch_metric_gamma(h, h, g, sigma2, t, k, ref_mean, data_rng, SymbolAlphabet::Gaussian);
  CHECK(gamma_tm > 0.95);
  CHECK(gamma_tm < 1.05);

  // severe mismatch: the model manifold is orthogonal to the true channel
  CVector h_bad(n);
  for (int i = 0; i < n; ++i) h_bad(i) = rng.complex_normal(1.0);
  h_bad -= h * (h.dot(h_bad) / h.squaredNorm());
  Rng data_rng2(3001);
  const double gamma_mm = mismatch_metric_gamma(h, h_bad, g, sigma2, t, k, ref_mean, data_rng2,
                                                SymbolAlphabet::Gaussian);
  CHECK(gamma_mm < 0.5);

  CHECK_THROWS_AS(mismatch_metric_gamma(h, h, g, sigma2, t, 0, ref_mean, data_rng),
                  std::invalid_argument);
}

TEST_CASE("distribution cache round-trip") {
  Rng rng(555);
  const auto dist = lr_reference_distribution(20, 4, 500, rng);
  const std::string path = "/tmp/emloc_lr_cache_test.bin";
  save_lr_distribution(dist, path);
  const auto loaded = load_lr_distribution(path);
  CHECK(loaded.n == dist.n);
  CHECK(loaded.t == dist.t);
  CHECK(loaded.n_draws == dist.n_draws);
  CHECK(loaded.seed == dist.seed);
  CHECK(loaded.samples == dist.samples);

  // keyed cache builds once and reloads identically
  const std::string dir = "/tmp/emloc_lr_cache_dir";
  std::filesystem::remove_all(dir);
  const auto built = load_or_build_lr_distribution(dir, 20, 4, 300, 77);
  const auto again = load_or_build_lr_distribution(dir, 20, 4, 300, 77);
  CHECK(built.samples == again.samples);
}

TEST_CASE("peak grouping separates the true source pair") {
  const double lambda = 0.0107068735;
  const DipoleDims dims{lambda / 4.0, lambda / 500.0};
  const auto bs = build_uniform_array(8, 8, lambda / 2, lambda / 2, dims);

  Manifold mm;
  mm.kind = ChannelModelKind::NF;
  mm.target = bs;
  mm.wavelength = lambda;

  // angular separations well beyond the array's near-field resolution so a
  // wrong pairing cannot explain the data
  const std::vector<Vec3> peaks = {Vec3(-2.0, -0.5, 4.0), Vec3(1.5, -0.5, 3.0),
                                   Vec3(0.0, -0.5, 3.5)};
  // data generated from the first two peaks through the same manifold
  const CMatrix h_true = mm.matrix({peaks[0], peaks[1]});
  const RVector g = RVector::Constant(2, 1e-4);
  const double sigma2 = 1e-11;
  Rng rng(6060);
  const auto snap = generate_received(h_true, g, sigma2, 10, rng);

  const auto groups = group_candidates(peaks, 2, snap.x, mm, sigma2);
  REQUIRE(groups.size() == 3);
  CHECK(groups[0].peak_indices == std::vector<int>({0, 1}));
  CHECK(groups[0].lr > groups[1].lr);
  CHECK(groups[0].lr > 0.2);
  // wrong pairings land far below the 1% threshold (around 0.32 for N=64)
  CHECK(groups[1].lr < 0.2);
  CHECK(groups[2].lr < 0.2);
  CHECK(std::is_sorted(groups.begin(), groups.end(),
                       [](const PeakGrouping& a, const PeakGrouping& b) { return a.lr > b.lr; }));

  // exactly M peaks: single grouping
  const auto single = group_candidates({peaks[0], peaks[1]}, 2, snap.x, mm, sigma2);
  CHECK(single.size() == 1);

  // combinatorial cap
  std::vector<Vec3> many;
  for (int i = 0; i < 30; ++i) many.push_back(Vec3(-3.0 + 0.1 * i, -0.5, 3.0));
  CHECK_THROWS_AS(group_candidates(many, 10, snap.x, mm, sigma2, 1000), std::invalid_argument);
}
