#pragma once

#include <optional>
#include <vector>

#include "emloc/geometry.hpp"
#include "emloc/impedance.hpp"
#include "emloc/types.hpp"

namespace emloc {

// Z_tun = diag(R0 + j f), ohms
struct TunableImpedance {
  double r0 = 0.0;
  RVector f;

  CVector diag() const {
    CVector d(f.size());
    for (int i = 0; i < f.size(); ++i) d(i) = cdouble(r0, f(i));
    return d;
  }
};

enum class ChannelModelKind { TM_Direct, TM_RIS, NF, FF, NFMC, FFMC };
enum class LinkKind { General, Direct, RISOnly };

bool is_mc_corrected(ChannelModelKind kind);
const char* to_string(ChannelModelKind kind);

struct ChannelMatrix {
  CMatrix h;  // N x M voltage-transfer gain
  ChannelModelKind kind = ChannelModelKind::TM_Direct;
};

// Impedance blocks of the true-model equations. RIS blocks stay empty for
// direct links.
struct EmChannelBlocks {
  CMatrix z_rr;        // N x N
  CMatrix z_rt;        // N x M
  CMatrix z_tt;        // M x M
  CVector z_r_diag;    // N, receive load impedances
  CVector z_t_diag;    // M, transmit internal impedances
  CMatrix z_rR;        // N x NR
  CMatrix z_RR;        // NR x NR
  CMatrix z_Rt;        // NR x M
  CVector z_tun_diag;  // NR
  bool has_ris = false;
};

// H_EM = Psi_0^{-1} Psi_rt (Psi_tt + Z_t)^{-1}, with the link-specific
// Psi_rr / Psi_rt reductions.
ChannelMatrix em_channel_from_blocks(const EmChannelBlocks& blocks, LinkKind link);

ChannelMatrix em_channel(const ElementLayout& sources, const ElementLayout& bs,
                         const ElementLayout* ris, const TunableImpedance* ztun,
                         const CVector& z_t_diag, const CVector& z_r_diag, double wavelength,
                         LinkKind link);

// Spherical-wavefront model, entry n = lambda/(4 pi d_n) exp(-j 2 pi d_n / lambda)
CVector nf_channel(const Vec3& p, const ElementLayout& elems, double wavelength);

// Plane-wavefront model with constant amplitude lambda/(4 pi |p|); evaluated
// in the layout's local frame so a rotated RIS sees the correct angles.
CVector ff_channel(const Vec3& p, const ElementLayout& elems, double wavelength);

// C_MC = Z_r (Z_r + Z_rr)^{-1}
CMatrix mc_correction_direct(const CVector& z_r_diag, const CMatrix& z_rr);

// C_MC = -Z_r (Z_r + Z_rr)^{-1} Z_rR (Z_RR + Z_tun)^{-1}
CMatrix mc_correction_ris(const CVector& z_r_diag, const CMatrix& z_rr, const CMatrix& z_rR,
                          const CMatrix& z_RR, const CVector& z_tun_diag);

// Mismatched-model manifold: NF or FF vector on `target`, optionally mapped
// through a mutual-coupling correction. `vector(p)` has length N when a
// correction is present (RIS case maps NR -> N), target size otherwise.
struct Manifold {
  ChannelModelKind kind = ChannelModelKind::NF;
  ElementLayout target;
  double wavelength = 0.0;
  CMatrix cmc;  // empty => no correction

  int output_dim() const { return cmc.size() > 0 ? static_cast<int>(cmc.rows()) : target.size(); }
  CVector vector(const Vec3& p) const;
  CMatrix matrix(const std::vector<Vec3>& positions) const;
};

// A^{-1} B with a reciprocal-condition check; throws singular_matrix_error
// with `name` when rcond < 1e-12.
CMatrix solve_checked(const CMatrix& a, const CMatrix& b, const char* name);

}  // namespace emloc
