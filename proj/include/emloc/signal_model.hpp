#pragma once

#include <string>
#include <vector>

#include "emloc/rng.hpp"
#include "emloc/types.hpp"

namespace emloc {

// per-source transmit powers and noise power, both in dBm
struct PowerSpec {
  std::vector<double> tx_dbm;
  double noise_dbm = -87.0;

  RVector tx_watts() const {
    RVector g(static_cast<int>(tx_dbm.size()));
    for (size_t i = 0; i < tx_dbm.size(); ++i) g(static_cast<int>(i)) = dbm_to_watt(tx_dbm[i]);
    return g;
  }
  double noise_watts() const { return dbm_to_watt(noise_dbm); }
};

// QPSK is the simulation default; Gaussian symbols match the stochastic
// likelihood model and are used as a test toggle.
enum class SymbolAlphabet { QPSK, Gaussian };

struct SnapshotMatrix {
  CMatrix x;  // N x T
  std::uint64_t seed = 0;
};

// X = H sqrt(G) S + U with unit-power symbols and CN(0, sigma2) noise.
SnapshotMatrix generate_received(const CMatrix& h, const RVector& g_watts, double sigma2_watt,
                                 int t, Rng& rng, SymbolAlphabet alphabet = SymbolAlphabet::QPSK);

// R = H G H^* + sigma2 I
CMatrix model_covariance(const CMatrix& h, const RVector& g_watts, double sigma2_watt);

// R_hat = X X^* / T
CMatrix sample_covariance(const CMatrix& x);

// debugging dump: header line, then one CSV row per receive element with
// re/im pairs per snapshot
void write_snapshots_csv(const std::string& path, const SnapshotMatrix& snap);

}  // namespace emloc
