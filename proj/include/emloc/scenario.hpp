#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "emloc/channel.hpp"
#include "emloc/geometry.hpp"
#include "emloc/signal_model.hpp"
#include "emloc/types.hpp"

namespace emloc {

// Compiled physical scenario: layouts plus the geometry-only impedance
// blocks, shared read-only by trials.
struct PhysicalScenario {
  double wavelength = 0.0;
  DipoleDims dims;
  ElementLayout bs;
  ElementLayout sources;  // transmit dipoles at the true positions
  std::optional<ElementLayout> ris;
  LinkKind link = LinkKind::Direct;
  double r0_ohm = 0.2;  // fixed real part of Z_tun

  std::vector<Vec3> source_positions;
  RVector g_watts;
  double sigma2_watt = 0.0;
  int t = 10;

  double z_load_ohm = 50.0;
  CVector z_r_diag;  // N
  CVector z_t_diag;  // M

  // cached blocks
  CMatrix z_rr;        // N x N
  CMatrix z_rR;        // N x NR (RIS scenarios)
  CMatrix z_RR;        // NR x NR
  CMatrix cmc_direct;  // Z_r (Z_r + Z_rr)^{-1}

  int n() const { return bs.size(); }
  int n_ris() const { return ris ? ris->size() : 0; }
  int m() const { return static_cast<int>(source_positions.size()); }
  double source_plane_y() const { return source_positions.front().y(); }

  CVector z_tun_diag(const RVector& f) const;

  // Mismatched-model manifold; MC-corrected kinds are required for RIS links.
  Manifold manifold(ChannelModelKind kind, const RVector* profile_f = nullptr) const;
};

PhysicalScenario compile_scenario(double carrier_hz, const DipoleDims& dims,
                                  const ElementLayout& bs,
                                  const std::optional<ElementLayout>& ris, LinkKind link,
                                  const std::vector<Vec3>& source_positions,
                                  const RVector& g_watts, double sigma2_watt, int t,
                                  double z_load_ohm = 50.0, double r0_ohm = 0.2);

// True-model channel evaluator with per-profile cached factorizations.
class TrueChannelOp {
 public:
  TrueChannelOp(const PhysicalScenario& sc, const RVector* profile_f = nullptr);

  CMatrix matrix(const std::vector<Vec3>& source_positions) const;
  CMatrix matrix() const;                  // at the scenario's true sources
  CVector column(const Vec3& p) const;     // single-source channel

 private:
  const PhysicalScenario* sc_;
  CMatrix w_;         // Z_rR (Z_RR + Z_tun)^{-1}
  CMatrix psi0_base_; // I + Psi_rr Z_r^{-1}
};

}  // namespace emloc
