#include "emloc/channel.hpp"

#include <cmath>

#include <Eigen/LU>

namespace emloc {

namespace {
constexpr double kRcondLimit = 1e-12;

Eigen::PartialPivLU<CMatrix> factor_checked(const CMatrix& a, const char* name) {
  Eigen::PartialPivLU<CMatrix> lu(a);
  if (!(lu.rcond() > kRcondLimit)) throw singular_matrix_error(name);
  return lu;
}
}  // namespace

bool is_mc_corrected(ChannelModelKind kind) {
  return kind == ChannelModelKind::NFMC || kind == ChannelModelKind::FFMC;
}

const char* to_string(ChannelModelKind kind) {
  switch (kind) {
    case ChannelModelKind::TM_Direct: return "tm-direct";
    case ChannelModelKind::TM_RIS: return "tm-ris";
    case ChannelModelKind::NF: return "nf";
    case ChannelModelKind::FF: return "ff";
    case ChannelModelKind::NFMC: return "nfmc";
    case ChannelModelKind::FFMC: return "ffmc";
  }
  return "?";
}

CMatrix solve_checked(const CMatrix& a, const CMatrix& b, const char* name) {
  return factor_checked(a, name).solve(b);
}

ChannelMatrix em_channel_from_blocks(const EmChannelBlocks& blocks, LinkKind link) {
  const int n = static_cast<int>(blocks.z_rr.rows());
  const int m = static_cast<int>(blocks.z_tt.rows());
  if (link == LinkKind::RISOnly && !blocks.has_ris)
    throw std::invalid_argument("em_channel: RIS-only link requires RIS blocks");

  // Psi_rr and Psi_rt with the link-specific reductions; a General link with
  // no RIS reduces to Direct
  CMatrix psi_rr = blocks.z_rr;
  CMatrix psi_rt = blocks.z_rt;
  if (link != LinkKind::Direct && blocks.has_ris) {
    CMatrix a = blocks.z_RR;
    a.diagonal() += blocks.z_tun_diag;
    const auto lu_a = factor_checked(a, "Z_RR + Z_tun");
    // Z_rR A^{-1} via A^{-1} Z_rR^T; A is complex-symmetric by construction
    const CMatrix w = lu_a.solve(blocks.z_rR.transpose()).transpose();
    psi_rr -= w * blocks.z_rR.transpose();
    if (link == LinkKind::General)
      psi_rt -= w * blocks.z_Rt;
    else
      psi_rt = -w * blocks.z_Rt;
  }

  CMatrix b = blocks.z_tt;
  b.diagonal() += blocks.z_t_diag;
  const auto lu_b = factor_checked(b, "Psi_tt + Z_t");
  const CMatrix t1 = lu_b.solve(psi_rt.transpose()).transpose();  // Psi_rt B^{-1}

  CMatrix psi0 = CMatrix::Identity(n, n);
  psi0 += psi_rr * blocks.z_r_diag.cwiseInverse().asDiagonal();
  psi0 -= t1 * psi_rt.transpose();

  ChannelMatrix out;
  out.h = solve_checked(psi0, t1, "Psi_0");
  out.kind = (link == LinkKind::Direct) ? ChannelModelKind::TM_Direct : ChannelModelKind::TM_RIS;
  (void)m;
  return out;
}

ChannelMatrix em_channel(const ElementLayout& sources, const ElementLayout& bs,
                         const ElementLayout* ris, const TunableImpedance* ztun,
                         const CVector& z_t_diag, const CVector& z_r_diag, double wavelength,
                         LinkKind link) {
  if (link == LinkKind::RISOnly && (ris == nullptr || ztun == nullptr))
    throw std::invalid_argument("em_channel: RIS layout and tunable impedance required");
  EmChannelBlocks blocks;
  blocks.z_rr = impedance_matrix(bs, bs, wavelength).z;
  blocks.z_rt = impedance_matrix(bs, sources, wavelength).z;
  blocks.z_tt = impedance_matrix(sources, sources, wavelength).z;
  blocks.z_r_diag = z_r_diag;
  blocks.z_t_diag = z_t_diag;
  if (ris != nullptr && ztun != nullptr) {
    blocks.z_rR = impedance_matrix(bs, *ris, wavelength).z;
    blocks.z_RR = impedance_matrix(*ris, *ris, wavelength).z;
    blocks.z_Rt = impedance_matrix(*ris, sources, wavelength).z;
    blocks.z_tun_diag = ztun->diag();
    blocks.has_ris = true;
  }
  return em_channel_from_blocks(blocks, link);
}

CVector nf_channel(const Vec3& p, const ElementLayout& elems, double wavelength) {
  const double k = 2.0 * M_PI / wavelength;
  CVector h(elems.size());
  for (int i = 0; i < elems.size(); ++i) {
    const double d = (p - elems.elements[i].position).norm();
    if (!(d > wavelength * 1e-9))
      throw std::invalid_argument("nf_channel: point coincides with an element");
    h(i) = wavelength / (4.0 * M_PI * d) * std::exp(cdouble(0.0, -k * d));
  }
  return h;
}

CVector ff_channel(const Vec3& p, const ElementLayout& elems, double wavelength) {
  const double k = 2.0 * M_PI / wavelength;
  const double phi_r = elems.rotation_phi;
  // rotation matrix of the layout frame: local (x0, y0, 0) -> global
  Eigen::Matrix3d rot;
  rot << std::cos(phi_r), 0.0, -std::sin(phi_r),
         0.0, 1.0, 0.0,
         std::sin(phi_r), 0.0, std::cos(phi_r);
  const Vec3 p_loc = rot.transpose() * (p - elems.origin);
  const double r = p_loc.norm();
  if (!(r > wavelength * 1e-9)) throw std::invalid_argument("ff_channel: point at the layout origin");

  const double phi = std::atan2(-p_loc.x(), p_loc.z());
  const double psi = std::atan2(-p_loc.y(), std::hypot(p_loc.x(), p_loc.z()));
  const Vec3 v(std::cos(psi) * std::sin(phi), std::sin(psi), std::cos(psi) * std::cos(phi));

  const cdouble amp = wavelength / (4.0 * M_PI * r) * std::exp(cdouble(0.0, -k * r));
  CVector h(elems.size());
  for (int i = 0; i < elems.size(); ++i) {
    const Vec3 r_loc = rot.transpose() * (elems.elements[i].position - elems.origin);
    h(i) = amp * std::exp(cdouble(0.0, -k * v.dot(r_loc)));
  }
  return h;
}

CMatrix mc_correction_direct(const CVector& z_r_diag, const CMatrix& z_rr) {
  CMatrix m = z_rr;
  m.diagonal() += z_r_diag;
  const auto lu = factor_checked(m, "Z_r + Z_rr");
  CMatrix zr = CMatrix::Zero(z_rr.rows(), z_rr.cols());
  zr.diagonal() = z_r_diag;
  // Z_r M^{-1} = ((M^T)^{-1} Z_r^T)^T
  return lu.solve(zr.transpose()).transpose();
}

CMatrix mc_correction_ris(const CVector& z_r_diag, const CMatrix& z_rr, const CMatrix& z_rR,
                          const CMatrix& z_RR, const CVector& z_tun_diag) {
  const CMatrix head = mc_correction_direct(z_r_diag, z_rr);
  CMatrix a = z_RR;
  a.diagonal() += z_tun_diag;
  const auto lu_a = factor_checked(a, "Z_RR + Z_tun");
  const CMatrix w = lu_a.solve(z_rR.transpose()).transpose();  // Z_rR A^{-1}
  return -head * w;
}

CVector Manifold::vector(const Vec3& p) const {
  const bool nf = (kind == ChannelModelKind::NF || kind == ChannelModelKind::NFMC);
  const CVector base = nf ? nf_channel(p, target, wavelength) : ff_channel(p, target, wavelength);
  return cmc.size() > 0 ? CVector(cmc * base) : base;
}

CMatrix Manifold::matrix(const std::vector<Vec3>& positions) const {
  CMatrix h(output_dim(), static_cast<int>(positions.size()));
  for (size_t m = 0; m < positions.size(); ++m) h.col(static_cast<int>(m)) = vector(positions[m]);
  return h;
}

}  // namespace emloc
