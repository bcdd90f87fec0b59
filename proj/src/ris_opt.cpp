#include "emloc/ris_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "emloc/optim.hpp"

namespace emloc {

double q_metric(const CVector& h_p, const CVector& h_p0) {
  // least-squares scalar: q = h(p)^H h(p0) / |h(p)|^2. Using the same dot
  // accumulation for numerator and denominator makes Q(p0, p0) exactly zero.
  const cdouble w = h_p.dot(h_p0);
  const double np2 = h_p.dot(h_p).real();
  const double n02 = h_p0.squaredNorm();
  if (!(np2 > 0.0) || !(n02 > 0.0)) throw std::invalid_argument("q_metric: zero channel");
  const cdouble q = w / np2;
  return (q * h_p - h_p0).squaredNorm() / n02;
}

void OptimizationArea::validate() const {
  if (kind == Kind::Continuous) {
    if (!(lower < upper)) throw std::invalid_argument("continuous area needs lower < upper");
  } else {
    if (values.size() < 2) throw std::invalid_argument("finite alphabet needs >= 2 values");
    auto v = values;
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end())
      throw std::invalid_argument("finite alphabet values must be distinct");
  }
}

double OptimizationArea::project(double v) const {
  if (kind == Kind::Continuous) return std::clamp(v, lower, upper);
  double best = values.front();
  for (double a : values)
    if (std::abs(a - v) < std::abs(best - v)) best = a;
  return best;
}

OptimizationArea OptimizationArea::continuous(double lo, double hi) {
  OptimizationArea a;
  a.kind = Kind::Continuous;
  a.lower = lo;
  a.upper = hi;
  a.validate();
  return a;
}

OptimizationArea OptimizationArea::finite(std::vector<double> values) {
  OptimizationArea a;
  a.kind = Kind::FiniteAlphabet;
  a.values = std::move(values);
  a.validate();
  return a;
}

RVector default_fd_deltas(const RVector& q) {
  if (q.size() % 3 != 0) throw std::invalid_argument("estimate vector must be [x,z,g] per source");
  RVector d(q.size());
  for (int i = 0; i < q.size(); ++i)
    d(i) = (i % 3 == 2) ? std::max(1e-3 * q(i), 1e-6) : 1e-3;
  return d;
}

RMatrix fisher_information(const CovarianceModel& model, const RVector& q, int t,
                           const RVector& deltas) {
  const int dim = static_cast<int>(q.size());
  if (deltas.size() != dim) throw std::invalid_argument("fisher_information: delta size mismatch");

  const CMatrix r0 = model(q);
  Eigen::LLT<CMatrix> llt(r0);
  if (llt.info() != Eigen::Success) throw singular_matrix_error("R (covariance at q)");

  std::vector<CMatrix> a(dim);  // R^{-1} dR/dq_i
  for (int i = 0; i < dim; ++i) {
    RVector qp = q, qm = q;
    qp(i) += deltas(i);
    qm(i) -= deltas(i);
    const CMatrix di = (model(qp) - model(qm)) / (2.0 * deltas(i));
    a[i] = llt.solve(di);
  }

  RMatrix j(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int k = i; k < dim; ++k) {
      const double v = t * (a[i].array() * a[k].transpose().array()).sum().real();
      j(i, k) = v;
      j(k, i) = v;
    }
  return j;
}

double crb_from_fisher(const RMatrix& j) {
  Eigen::FullPivLU<RMatrix> lu(j);
  if (!lu.isInvertible()) throw unidentifiable_error("Fisher information matrix is singular");
  return std::sqrt(lu.inverse().trace());
}

RVector crb_axes_from_fisher(const RMatrix& j) {
  Eigen::FullPivLU<RMatrix> lu(j);
  if (!lu.isInvertible()) throw unidentifiable_error("Fisher information matrix is singular");
  return lu.inverse().diagonal().cwiseMax(0.0).cwiseSqrt();
}

namespace {
std::vector<Vec3> positions_from_estimate(const RVector& q, double y_plane) {
  std::vector<Vec3> pos(q.size() / 3);
  for (size_t i = 0; i < pos.size(); ++i) pos[i] = Vec3(q(3 * i), y_plane, q(3 * i + 1));
  return pos;
}

RVector powers_from_estimate(const RVector& q) {
  RVector g(q.size() / 3);
  for (int i = 0; i < g.size(); ++i) g(i) = q(3 * i + 2);
  return g;
}
}  // namespace

CovarianceModel mm_covariance_model(const Manifold& mm, double sigma2_watt, double y_plane) {
  auto mm_copy = std::make_shared<Manifold>(mm);
  return [mm_copy, sigma2_watt, y_plane](const RVector& q) {
    const CMatrix h = mm_copy->matrix(positions_from_estimate(q, y_plane));
    return model_covariance(h, powers_from_estimate(q), sigma2_watt);
  };
}

CovarianceModel tm_covariance_model(std::shared_ptr<TrueChannelOp> op, double sigma2_watt,
                                    double y_plane) {
  return [op, sigma2_watt, y_plane](const RVector& q) {
    const CMatrix h = op->matrix(positions_from_estimate(q, y_plane));
    return model_covariance(h, powers_from_estimate(q), sigma2_watt);
  };
}

RVector pack_estimate(const std::vector<Vec3>& positions, const RVector& g_watts) {
  if (static_cast<int>(positions.size()) != g_watts.size())
    throw std::invalid_argument("pack_estimate: size mismatch");
  RVector q(3 * positions.size());
  for (size_t i = 0; i < positions.size(); ++i) {
    q(3 * i) = positions[i].x();
    q(3 * i + 1) = positions[i].z();
    q(3 * i + 2) = g_watts(static_cast<int>(i));
  }
  return q;
}

RisCrbEvaluator::RisCrbEvaluator(const PhysicalScenario& sc, ChannelModelKind mm_kind,
                                 const RVector& q, int t, const RVector& deltas)
    : sc_(&sc), kind_(mm_kind), q_(q), t_(t), deltas_(deltas), sigma2_(sc.sigma2_watt) {
  if (!sc.ris) throw std::invalid_argument("RisCrbEvaluator: scenario has no RIS");
  if (q.size() % 3 != 0 || q.size() == 0) throw std::invalid_argument("bad estimate vector");
  if (!is_mc_corrected(mm_kind)) throw std::invalid_argument("profile CRB needs an MC-corrected MM");

  // finite-difference nodes: per source, center + x+- + z+-
  const double y_plane = sc.source_plane_y();
  const int m = static_cast<int>(q.size()) / 3;
  const bool nf = (mm_kind == ChannelModelKind::NFMC);
  for (int s = 0; s < m; ++s) {
    const double x = q(3 * s), z = q(3 * s + 1);
    fd_nodes_.push_back(Vec3(x, y_plane, z));
    fd_nodes_.push_back(Vec3(x + deltas_(3 * s), y_plane, z));
    fd_nodes_.push_back(Vec3(x - deltas_(3 * s), y_plane, z));
    fd_nodes_.push_back(Vec3(x, y_plane, z + deltas_(3 * s + 1)));
    fd_nodes_.push_back(Vec3(x, y_plane, z - deltas_(3 * s + 1)));
  }
  h_nf_at_nodes_.reserve(fd_nodes_.size());
  for (const auto& node : fd_nodes_)
    h_nf_at_nodes_.push_back(nf ? nf_channel(node, *sc.ris, sc.wavelength)
                                : ff_channel(node, *sc.ris, sc.wavelength));
}

void RisCrbEvaluator::set_profile(const RVector& f) {
  f_ = f;
  CMatrix a = sc_->z_RR;
  a.diagonal() += sc_->z_tun_diag(f);
  Eigen::PartialPivLU<CMatrix> lu(a);
  if (!(lu.rcond() > 1e-12)) throw singular_matrix_error("Z_RR + Z_tun");
  ainv_ = lu.inverse();
  // keep A^{-1} exactly symmetric (A is complex-symmetric)
  ainv_ = ((ainv_ + ainv_.transpose()) / 2.0).eval();
  cmc_ = -sc_->cmc_direct * (sc_->z_rR * ainv_);
  refresh_cached_vectors();
}

void RisCrbEvaluator::refresh_cached_vectors() {
  h_at_nodes_.resize(h_nf_at_nodes_.size());
  for (size_t i = 0; i < h_nf_at_nodes_.size(); ++i) h_at_nodes_[i] = cmc_ * h_nf_at_nodes_[i];
  crb_current_ = crb_from_manifold(h_at_nodes_);
}

double RisCrbEvaluator::crb_with(int coord, double value) {
  const cdouble delta(0.0, value - f_(coord));
  if (delta == cdouble(0.0, 0.0)) return crb_current_;
  const cdouble denom = 1.0 + delta * ainv_(coord, coord);
  if (std::abs(denom) < 1e-12) return std::numeric_limits<double>::infinity();
  const cdouble scale = delta / denom;

  // A_new^{-1} = A^{-1} - scale * A^{-1} e_n e_n^T A^{-1}
  // => h_new = h - scale * (C e_... ) (a_n . h_nf)      per cached node,
  //    with the update column  ccol = -D (Z_rR A^{-1} e_n) = cmc_.col(n)
  const CVector ccol = cmc_.col(coord);
  const CVector arow = ainv_.row(coord).transpose();  // = A^{-1} e_n (symmetric)

  std::vector<CVector> h_cand(h_at_nodes_.size());
  for (size_t i = 0; i < h_at_nodes_.size(); ++i) {
    const cdouble w = (arow.transpose() * h_nf_at_nodes_[i]).value();  // a_n . h_nf, unconjugated
    h_cand[i] = h_at_nodes_[i] - (scale * w) * ccol;
  }
  return crb_from_manifold(h_cand);
}

void RisCrbEvaluator::commit(int coord, double value) {
  const cdouble delta(0.0, value - f_(coord));
  if (delta == cdouble(0.0, 0.0)) return;
  const cdouble denom = 1.0 + delta * ainv_(coord, coord);
  if (std::abs(denom) < 1e-12) throw singular_matrix_error("Z_RR + Z_tun (rank-one update)");
  const cdouble scale = delta / denom;
  const CVector acol = ainv_.col(coord);
  const CVector ccol = cmc_.col(coord);
  cmc_ -= (scale * ccol) * acol.transpose();  // C_new = C - scale * C e_n (A^{-1} e_n)^T
  ainv_ -= (scale * acol) * acol.transpose();
  f_(coord) = value;
  refresh_cached_vectors();
}

double RisCrbEvaluator::crb_from_manifold(const std::vector<CVector>& h) const {
  const int m = static_cast<int>(q_.size()) / 3;
  const int dim = 3 * m;
  const int n = static_cast<int>(h.front().size());

  if (m == 1) {
    // closed-form R^{-1} for the rank-one covariance
    const double g = q_(2);
    const CVector& h0 = h[0];
    const double h0n2 = h0.squaredNorm();
    const double kappa = g / (sigma2_ + g * h0n2);
    auto rinv_apply = [&](const CVector& v) -> CVector {
      return (v - h0 * (kappa * h0.dot(v))) / sigma2_;
    };
    // D_x = g (h1 h1^* - h2 h2^*) / (2 dx), D_z likewise, D_g = h0 h0^*
    const double cx = g / (2.0 * deltas_(0));
    const double cz = g / (2.0 * deltas_(1));
    struct Term {
      int vec;
      double coef;
    };
    const std::vector<std::vector<Term>> d_terms = {
        {{1, cx}, {2, -cx}}, {{3, cz}, {4, -cz}}, {{0, 1.0}}};

    std::vector<CVector> rinv_h(5);
    for (int i = 0; i < 5; ++i) rinv_h[i] = rinv_apply(h[i]);
    Eigen::Matrix<cdouble, 5, 5> inner;
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b) inner(a, b) = h[a].dot(rinv_h[b]);  // h_a^* R^{-1} h_b

    RMatrix j(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int k = i; k < 3; ++k) {
        double acc = 0.0;
        for (const auto& ta : d_terms[i])
          for (const auto& tb : d_terms[k])
            acc += ta.coef * tb.coef * std::norm(inner(ta.vec, tb.vec));
        j(i, k) = t_ * acc;
        j(k, i) = j(i, k);
      }
    return crb_from_fisher(j);
  }

  // generic path: dense covariance and central differences over all 3M coords
  auto cov_from = [&](const std::vector<const CVector*>& cols, const RVector& g) {
    CMatrix hm(n, m);
    for (int s = 0; s < m; ++s) hm.col(s) = *cols[s];
    return model_covariance(hm, g, sigma2_);
  };
  std::vector<const CVector*> center(m);
  for (int s = 0; s < m; ++s) center[s] = &h[5 * s];
  const RVector g0 = powers_from_estimate(q_);
  const CMatrix r0 = cov_from(center, g0);
  Eigen::LLT<CMatrix> llt(r0);
  if (llt.info() != Eigen::Success) throw singular_matrix_error("R_MM (profile CRB)");

  std::vector<CMatrix> a(dim);
  for (int s = 0; s < m; ++s) {
    for (int c = 0; c < 3; ++c) {
      auto plus = center;
      auto minus = center;
      RVector gp = g0, gm = g0;
      if (c == 0) {
        plus[s] = &h[5 * s + 1];
        minus[s] = &h[5 * s + 2];
      } else if (c == 1) {
        plus[s] = &h[5 * s + 3];
        minus[s] = &h[5 * s + 4];
      } else {
        gp(s) += deltas_(3 * s + 2);
        gm(s) -= deltas_(3 * s + 2);
      }
      const CMatrix di = (cov_from(plus, gp) - cov_from(minus, gm)) / (2.0 * deltas_(3 * s + c));
      a[3 * s + c] = llt.solve(di);
    }
  }
  RMatrix j(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int k = i; k < dim; ++k) {
      j(i, k) = t_ * (a[i].array() * a[k].transpose().array()).sum().real();
      j(k, i) = j(i, k);
    }
  return crb_from_fisher(j);
}

RisOptimizeResult optimize_ris_profile(RisCrbEvaluator& eval, const OptimizationArea& area,
                                       const RVector& f_init, const RisOptimizeOptions& opts) {
  area.validate();
  RVector f = f_init;
  for (int i = 0; i < f.size(); ++i) f(i) = area.project(f(i));
  eval.set_profile(f);

  RisOptimizeResult res;
  double nu_bar = eval.crb();
  res.crb_trace.push_back(nu_bar);

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    bool changed = false;
    for (int c = 0; c < eval.num_coords(); ++c) {
      double nu = nu_bar;  // current value belongs to the candidate set
      double best_value = eval.profile()(c);
      if (area.kind == OptimizationArea::Kind::FiniteAlphabet) {
        for (double v : area.values) {
          const double cr = (v == eval.profile()(c)) ? nu_bar : eval.crb_with(c, v);
          if (cr < nu) {
            nu = cr;
            best_value = v;
          }
        }
      } else {
        double fmin = 0.0;
        const double xm = golden_section_min([&](double v) { return eval.crb_with(c, v); },
                                             area.lower, area.upper, opts.golden_tol_ohm,
                                             opts.golden_max_iters, &fmin);
        if (fmin < nu) {
          nu = fmin;
          best_value = xm;
        }
      }
      // exact tie (or no improvement): keep the previous value
      if (nu < nu_bar) {
        eval.commit(c, best_value);
        nu_bar = eval.crb();
        res.crb_trace.push_back(nu_bar);
        changed = true;
      }
    }
    ++res.sweeps;
    res.crb_per_sweep.push_back(nu_bar);
    if (!changed) break;
  }
  res.f = eval.profile();
  res.crb_final = nu_bar;
  return res;
}

TwoStageResult two_stage_localize(const PhysicalScenario& sc, const TwoStageOptions& opts,
                                  const LRDistribution& ref, Rng& rng) {
  if (sc.link != LinkKind::RISOnly)
    throw std::invalid_argument("two_stage_localize: scenario must use the RIS-only link");

  TwoStageResult res;
  // stage 1: random profile, T1 snapshots, MDL + MUSIC
  RVector f0(sc.n_ris());
  for (int i = 0; i < f0.size(); ++i) f0(i) = opts.mu_profile_ohm * rng.normal();
  res.f_initial = f0;

  TrueChannelOp true_op(sc, &f0);
  const auto x1 = generate_received(true_op.matrix(), sc.g_watts, sc.sigma2_watt, opts.t1, rng,
                                    opts.alphabet);
  const int m_hat = estimate_num_sources_mdl(x1.x);
  res.stage1_m_hat = m_hat;
  if (m_hat == 0) {
    res.early_no_source = true;
    return res;
  }

  const Manifold mm1 = sc.manifold(opts.mm_kind, &f0);
  const CMatrix r_hat1 = sample_covariance(x1.x);
  const RMatrix spectrum = music_spectrum(r_hat1, m_hat, opts.grid, mm1);
  res.stage1_positions = music_peaks(spectrum, opts.grid, m_hat);
  res.stage1_powers = estimate_powers(mm1.matrix(res.stage1_positions), r_hat1, sc.sigma2_watt);

  // profile optimization at the stage-1 estimate
  const RVector q = pack_estimate(res.stage1_positions, res.stage1_powers);
  RisCrbEvaluator eval(sc, opts.mm_kind, q, opts.t2, default_fd_deltas(q));
  eval.set_profile(f0);
  res.crb_at_random_profile = eval.crb();
  const auto opt = optimize_ris_profile(eval, opts.area, f0, opts.opt);
  res.f_optimized = opt.f;
  res.crb_trace = opt.crb_trace;
  res.crb_optimized = opt.crb_final;

  // stage 2: apply the optimized profile and run the full pipeline
  TrueChannelOp true_op2(sc, &res.f_optimized);
  const auto x2 = generate_received(true_op2.matrix(), sc.g_watts, sc.sigma2_watt, opts.t2, rng,
                                    opts.alphabet);
  const Manifold mm2 = sc.manifold(opts.mm_kind, &res.f_optimized);
  LocalizeOptions loc = opts.loc;
  loc.p_beta = opts.p_beta;
  res.final = localize(x2.x, mm2, opts.grid, sc.sigma2_watt, ref, loc);
  return res;
}

}  // namespace emloc
