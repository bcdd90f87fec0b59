#include "emloc/scenario.hpp"

#include <Eigen/LU>

namespace emloc {

CVector PhysicalScenario::z_tun_diag(const RVector& f) const {
  if (f.size() != n_ris()) throw std::invalid_argument("profile length must match RIS size");
  CVector d(f.size());
  for (int i = 0; i < f.size(); ++i) d(i) = cdouble(r0_ohm, f(i));
  return d;
}

Manifold PhysicalScenario::manifold(ChannelModelKind kind, const RVector* profile_f) const {
  Manifold mm;
  mm.kind = kind;
  mm.wavelength = wavelength;
  if (link == LinkKind::Direct) {
    mm.target = bs;
    if (is_mc_corrected(kind)) mm.cmc = cmc_direct;
  } else {
    if (!is_mc_corrected(kind))
      throw std::invalid_argument(
          "RIS-link manifolds must be MC-corrected (NFMC or FFMC) to map onto the BS array");
    if (!ris || profile_f == nullptr)
      throw std::invalid_argument("RIS manifold needs the RIS layout and a profile");
    mm.target = *ris;
    mm.cmc = mc_correction_ris(z_r_diag, z_rr, z_rR, z_RR, z_tun_diag(*profile_f));
  }
  return mm;
}

PhysicalScenario compile_scenario(double carrier_hz, const DipoleDims& dims,
                                  const ElementLayout& bs,
                                  const std::optional<ElementLayout>& ris, LinkKind link,
                                  const std::vector<Vec3>& source_positions,
                                  const RVector& g_watts, double sigma2_watt, int t,
                                  double z_load_ohm, double r0_ohm) {
  if (!(carrier_hz > 0.0)) throw std::invalid_argument("carrier frequency must be positive");
  if (source_positions.empty()) throw std::invalid_argument("at least one source required");
  if (static_cast<int>(source_positions.size()) != g_watts.size())
    throw std::invalid_argument("power count must match source count");
  if (link != LinkKind::Direct && !ris)
    throw std::invalid_argument("RIS layout required for this link kind");

  PhysicalScenario sc;
  sc.wavelength = kSpeedOfLight / carrier_hz;
  sc.dims = dims;
  sc.bs = bs;
  sc.ris = ris;
  sc.link = link;
  sc.r0_ohm = r0_ohm;
  sc.source_positions = source_positions;
  sc.sources = build_sources(source_positions, dims);
  sc.g_watts = g_watts;
  sc.sigma2_watt = sigma2_watt;
  sc.t = t;
  sc.z_load_ohm = z_load_ohm;
  sc.z_r_diag = CVector::Constant(bs.size(), cdouble(z_load_ohm, 0.0));
  sc.z_t_diag = CVector::Constant(static_cast<int>(source_positions.size()),
                                  cdouble(z_load_ohm, 0.0));

  sc.z_rr = impedance_matrix(sc.bs, sc.bs, sc.wavelength).z;
  sc.cmc_direct = mc_correction_direct(sc.z_r_diag, sc.z_rr);
  if (ris) {
    sc.z_rR = impedance_matrix(sc.bs, *sc.ris, sc.wavelength).z;
    sc.z_RR = impedance_matrix(*sc.ris, *sc.ris, sc.wavelength).z;
  }
  return sc;
}

TrueChannelOp::TrueChannelOp(const PhysicalScenario& sc, const RVector* profile_f) : sc_(&sc) {
  CMatrix psi_rr = sc.z_rr;
  if (sc.link != LinkKind::Direct) {
    if (profile_f == nullptr)
      throw std::invalid_argument("TrueChannelOp: RIS link needs a tunable profile");
    CMatrix a = sc.z_RR;
    a.diagonal() += sc.z_tun_diag(*profile_f);
    Eigen::PartialPivLU<CMatrix> lu_a(a);
    if (!(lu_a.rcond() > 1e-12)) throw singular_matrix_error("Z_RR + Z_tun");
    w_ = lu_a.solve(sc.z_rR.transpose()).transpose();
    psi_rr -= w_ * sc.z_rR.transpose();
  }
  psi0_base_ = CMatrix::Identity(sc.n(), sc.n());
  psi0_base_ += psi_rr * sc.z_r_diag.cwiseInverse().asDiagonal();
}

CMatrix TrueChannelOp::matrix(const std::vector<Vec3>& source_positions) const {
  const auto& sc = *sc_;
  const ElementLayout srcs = build_sources(source_positions, sc.dims);
  const CMatrix z_tt = impedance_matrix(srcs, srcs, sc.wavelength).z;

  CMatrix psi_rt;
  if (sc.link == LinkKind::RISOnly) {
    const CMatrix z_Rt = impedance_matrix(*sc.ris, srcs, sc.wavelength).z;
    psi_rt = -w_ * z_Rt;
  } else {
    psi_rt = impedance_matrix(sc.bs, srcs, sc.wavelength).z;
    if (sc.link == LinkKind::General) {
      const CMatrix z_Rt = impedance_matrix(*sc.ris, srcs, sc.wavelength).z;
      psi_rt -= w_ * z_Rt;
    }
  }

  CMatrix b = z_tt;
  b.diagonal().array() += cdouble(sc.z_load_ohm, 0.0);
  Eigen::PartialPivLU<CMatrix> lu_b(b);
  if (!(lu_b.rcond() > 1e-12)) throw singular_matrix_error("Psi_tt + Z_t");
  const CMatrix t1 = lu_b.solve(psi_rt.transpose()).transpose();

  CMatrix psi0 = psi0_base_ - t1 * psi_rt.transpose();
  return solve_checked(psi0, t1, "Psi_0");
}

CMatrix TrueChannelOp::matrix() const { return matrix(sc_->source_positions); }

CVector TrueChannelOp::column(const Vec3& p) const { return matrix({p}).col(0); }

}  // namespace emloc
