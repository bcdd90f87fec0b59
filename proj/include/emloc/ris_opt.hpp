#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "emloc/locate.hpp"
#include "emloc/scenario.hpp"
#include "emloc/types.hpp"

namespace emloc {

// Normalized least-squares channel similarity:
// Q = |q h(p) - h(p0)|^2 / |h(p0)|^2 with q = h^*(p0) h(p) / |h(p)|^2.
// 0 at p = p0, 1 for orthogonal channels.
double q_metric(const CVector& h_p, const CVector& h_p0);

struct OptimizationArea {
  enum class Kind { Continuous, FiniteAlphabet };
  Kind kind = Kind::Continuous;
  double lower = 0.0, upper = 0.0;  // ohm, continuous bounds
  std::vector<double> values;       // ohm, finite alphabet

  void validate() const;
  double project(double v) const;  // clamp / nearest alphabet value

  static OptimizationArea continuous(double lo, double hi);
  static OptimizationArea finite(std::vector<double> values);
};

// parameter vector q = [x_1, z_1, g_1, ..., x_M, z_M, g_M]
using CovarianceModel = std::function<CMatrix(const RVector& q)>;

// central-difference steps: 0.001 m for positions, max(1e-3 g, 1e-6 W) for powers
RVector default_fd_deltas(const RVector& q);

// [J]_ij = T tr(R^{-1} dR/dq_i R^{-1} dR/dq_j) with central differences.
RMatrix fisher_information(const CovarianceModel& model, const RVector& q, int t,
                           const RVector& deltas);

double crb_from_fisher(const RMatrix& j);        // sqrt(tr(J^{-1}))
RVector crb_axes_from_fisher(const RMatrix& j);  // sqrt(diag(J^{-1}))

// R(q) = H_MM(P(q)) diag(g(q)) H_MM^* + sigma2 I on the fixed source plane
CovarianceModel mm_covariance_model(const Manifold& mm, double sigma2_watt, double y_plane);
// same with the true EM channel (profile fixed inside the op)
CovarianceModel tm_covariance_model(std::shared_ptr<TrueChannelOp> op, double sigma2_watt,
                                    double y_plane);

RVector pack_estimate(const std::vector<Vec3>& positions, const RVector& g_watts);

// CRB_NFMC(q, f) evaluator for profile optimization. Candidate evaluations
// reuse the committed (Z_RR + Z_tun)^{-1} through rank-one updates; the
// single-source case uses a closed-form R^{-1} so one candidate costs O(N NR).
class RisCrbEvaluator {
 public:
  RisCrbEvaluator(const PhysicalScenario& sc, ChannelModelKind mm_kind, const RVector& q, int t,
                  const RVector& deltas);

  void set_profile(const RVector& f);        // full refresh at f
  double crb() const { return crb_current_; }
  double crb_with(int coord, double value);  // candidate, committed state untouched
  void commit(int coord, double value);
  const RVector& profile() const { return f_; }
  int num_coords() const { return static_cast<int>(f_.size()); }

 private:
  double crb_from_manifold(const std::vector<CVector>& h_at_nodes) const;
  void refresh_cached_vectors();

  const PhysicalScenario* sc_;
  ChannelModelKind kind_;
  RVector q_;
  int t_ = 0;
  RVector deltas_;
  double sigma2_ = 0.0;

  std::vector<Vec3> fd_nodes_;          // center + per-position-coordinate +/- points
  std::vector<CVector> h_nf_at_nodes_;  // profile-independent RIS-side vectors

  RVector f_;
  CMatrix ainv_;  // (Z_RR + Z_tun)^{-1}
  CMatrix cmc_;   // -Z_r (Z_r + Z_rr)^{-1} Z_rR (Z_RR + Z_tun)^{-1}
  std::vector<CVector> h_at_nodes_;  // cmc_ * h_nf, cached for the committed profile
  double crb_current_ = 0.0;
};

struct RisOptimizeOptions {
  int max_sweeps = 100;
  double golden_tol_ohm = 1e-2;
  int golden_max_iters = 50;
};

struct RisOptimizeResult {
  RVector f;
  std::vector<double> crb_trace;      // initial value, then each accepted update
  std::vector<double> crb_per_sweep;  // value after each full sweep
  int sweeps = 0;
  double crb_final = 0.0;
};

// Algorithm: element-by-element coordinate descent on the CRB; exact ties
// keep the previous value; stops when a full sweep changes nothing.
RisOptimizeResult optimize_ris_profile(RisCrbEvaluator& eval, const OptimizationArea& area,
                                       const RVector& f_init,
                                       const RisOptimizeOptions& opts = {});

struct TwoStageOptions {
  int t1 = 10;
  int t2 = 10;
  OptimizationArea area;
  double mu_profile_ohm = 100.0;  // std of the random stage-1 profile
  SearchGrid grid;
  double p_beta = 0.01;
  ChannelModelKind mm_kind = ChannelModelKind::NFMC;
  RisOptimizeOptions opt;
  LocalizeOptions loc;
  SymbolAlphabet alphabet = SymbolAlphabet::QPSK;
};

struct TwoStageResult {
  RVector f_initial;
  RVector f_optimized;
  std::vector<Vec3> stage1_positions;
  RVector stage1_powers;
  int stage1_m_hat = 0;
  LocalizationResult final;
  std::vector<double> crb_trace;
  double crb_at_random_profile = 0.0;
  double crb_optimized = 0.0;
  bool early_no_source = false;
};

// Stage 1: random profile, T1 snapshots, MDL + MUSIC estimate, profile
// optimization at the estimate. Stage 2: optimized profile, T2 snapshots,
// ML estimate with classification.
TwoStageResult two_stage_localize(const PhysicalScenario& sc, const TwoStageOptions& opts,
                                  const LRDistribution& ref, Rng& rng);

}  // namespace emloc
