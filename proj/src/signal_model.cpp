#include "emloc/signal_model.hpp"

#include <cstdio>
#include <stdexcept>

namespace emloc {

SnapshotMatrix generate_received(const CMatrix& h, const RVector& g_watts, double sigma2_watt,
                                 int t, Rng& rng, SymbolAlphabet alphabet) {
  if (t < 1) throw std::invalid_argument("generate_received: T must be >= 1");
  if (h.cols() != g_watts.size())
    throw std::invalid_argument("generate_received: power count must match source count");
  if (!(sigma2_watt > 0.0)) throw std::invalid_argument("generate_received: noise power must be positive");

  const int n = static_cast<int>(h.rows());
  const int m = static_cast<int>(h.cols());

  CMatrix s(m, t);
  for (int j = 0; j < t; ++j)
    for (int i = 0; i < m; ++i)
      s(i, j) = (alphabet == SymbolAlphabet::QPSK) ? rng.qpsk() : rng.complex_normal(1.0);

  SnapshotMatrix out;
  out.seed = rng.seed_used();
  out.x = h * g_watts.cwiseSqrt().asDiagonal() * s;
  const double noise_std2 = sigma2_watt;
  for (int j = 0; j < t; ++j)
    for (int i = 0; i < n; ++i) out.x(i, j) += rng.complex_normal(noise_std2);
  return out;
}

CMatrix model_covariance(const CMatrix& h, const RVector& g_watts, double sigma2_watt) {
  if (!(sigma2_watt > 0.0)) throw std::invalid_argument("model_covariance: sigma2 must be positive");
  if (h.cols() != g_watts.size())
    throw std::invalid_argument("model_covariance: power count must match source count");
  CMatrix r = h * g_watts.asDiagonal() * h.adjoint();
  r.diagonal().array() += sigma2_watt;
  // enforce exact Hermitian symmetry against rounding
  return (r + r.adjoint()) / 2.0;
}

CMatrix sample_covariance(const CMatrix& x) {
  if (x.cols() < 1) throw std::invalid_argument("sample_covariance: T must be >= 1");
  CMatrix r = x * x.adjoint() / static_cast<double>(x.cols());
  return (r + r.adjoint()) / 2.0;
}

void write_snapshots_csv(const std::string& path, const SnapshotMatrix& snap) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (fp == nullptr) throw std::runtime_error("cannot open " + path);
  std::fprintf(fp, "# snapshot dump: N=%ld T=%ld seed=%llu; row per element, re/im per snapshot\n",
               static_cast<long>(snap.x.rows()), static_cast<long>(snap.x.cols()),
               static_cast<unsigned long long>(snap.seed));
  for (int i = 0; i < snap.x.rows(); ++i) {
    for (int j = 0; j < snap.x.cols(); ++j)
      std::fprintf(fp, "%s%.17g,%.17g", j ? "," : "", snap.x(i, j).real(), snap.x(i, j).imag());
    std::fprintf(fp, "\n");
  }
  std::fclose(fp);
}

}  // namespace emloc
