#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "emloc/ris_opt.hpp"

using namespace emloc;

namespace {
constexpr double kLambda = 0.0107068735;
const DipoleDims kDims{kLambda / 4.0, kLambda / 500.0};

PhysicalScenario small_ris_scenario(double g_dbm = 0.0) {
  const auto bs = build_uniform_array(4, 4, kLambda / 2, kLambda / 2, kDims);
  const auto ris =
      build_ris_layout(5, 5, kLambda / 2, kLambda / 2, Vec3(1, 0, 1), M_PI / 2, kDims);
  return compile_scenario(28e9, kDims, bs, ris, LinkKind::RISOnly, {Vec3(-1.51, -1.0, 3.1)},
                          RVector::Constant(1, dbm_to_watt(g_dbm)), dbm_to_watt(-120.0), 10);
}

PhysicalScenario direct_scenario(double g_dbm) {
  const auto bs = build_uniform_array(8, 8, kLambda / 2, kLambda / 2, kDims);
  return compile_scenario(28e9, kDims, bs, std::nullopt, LinkKind::Direct,
                          {Vec3(-2.0, -0.5, 4.0)}, RVector::Constant(1, dbm_to_watt(g_dbm)),
                          dbm_to_watt(-87.0), 10);
}
}  // namespace

TEST_CASE("q-metric properties") {
  Rng rng(1);
  CVector h0(8), h1(8);
  for (int i = 0; i < 8; ++i) {
    h0(i) = rng.complex_normal(1.0);
    h1(i) = rng.complex_normal(1.0);
  }
  CHECK(q_metric(h0, h0) == 0.0);

  // orthogonal channels: projection is zero
  CVector orth = h1 - h0 * (h0.dot(h1) / h0.squaredNorm());
  CHECK(q_metric(orth, h0) == doctest::Approx(1.0).epsilon(1e-12));

  for (int trial = 0; trial < 50; ++trial) {
    CVector a(8), b(8);
    for (int i = 0; i < 8; ++i) {
      a(i) = rng.complex_normal(1.0);
      b(i) = rng.complex_normal(1.0);
    }
    const double q = q_metric(a, b);
    CHECK(q >= 0.0);
    CHECK(q <= 1.0 + 1e-12);
  }
  CHECK_THROWS_AS(q_metric(CVector::Zero(8), h0), std::invalid_argument);
}

TEST_CASE("fisher information matches an analytic diagonal model") {
  // R(q) = diag(a_k + b_k q0^3 + c_k q1^2 q2): cubic so central differences
  // carry a genuine O(delta^2) truncation error
  const int n = 6, t = 7;
  RVector a(n), b(n), c(n);
  for (int k = 0; k < n; ++k) {
    a(k) = 1.0 + 0.2 * k;
    b(k) = 0.3 + 0.05 * k;
    c(k) = 0.1 + 0.02 * k;
  }
  auto model = [&](const RVector& q) {
    CMatrix r = CMatrix::Zero(n, n);
    for (int k = 0; k < n; ++k)
      r(k, k) = a(k) + b(k) * q(0) * q(0) * q(0) + c(k) * q(1) * q(1) * q(2);
    return r;
  };
  RVector q(3);
  q << 0.8, 1.1, 0.6;

  auto analytic = [&]() {
    RMatrix j = RMatrix::Zero(3, 3);
    for (int k = 0; k < n; ++k) {
      const double rk = a(k) + b(k) * q(0) * q(0) * q(0) + c(k) * q(1) * q(1) * q(2);
      const RVector dk = (RVector(3) << 3.0 * b(k) * q(0) * q(0),
                          2.0 * c(k) * q(1) * q(2), c(k) * q(1) * q(1))
                             .finished();
      j += t * (dk * dk.transpose()) / (rk * rk);
    }
    return j;
  };
  const RMatrix j_true = analytic();

  const RMatrix j1 = fisher_information(model, q, t, RVector::Constant(3, 4e-2));
  const RMatrix j2 = fisher_information(model, q, t, RVector::Constant(3, 2e-2));

  CHECK((j1 - j1.transpose()).norm() <= 1e-8 * j1.norm());
  const double e1 = (j1 - j_true).norm();
  const double e2 = (j2 - j_true).norm();
  CHECK(e1 <= 1e-2 * j_true.norm());
  // central differences: halving the step divides the error by about four
  CHECK(e2 <= 0.35 * e1);
  CHECK(e2 >= 0.15 * e1);
}

TEST_CASE("CRB scalings") {
  RMatrix j(2, 2);
  j << 4.0, 1.0, 1.0, 3.0;
  const double c1 = crb_from_fisher(j);
  const double c2 = crb_from_fisher(RMatrix(2.0 * j));  // doubling T doubles J
  CHECK(c2 == doctest::Approx(c1 / std::sqrt(2.0)).epsilon(1e-12));

  const RVector axes = crb_axes_from_fisher(j);
  CHECK(axes.size() == 2);
  CHECK(std::sqrt(axes(0) * axes(0) + axes(1) * axes(1)) ==
        doctest::Approx(c1).epsilon(1e-12));

  CHECK_THROWS_AS(crb_from_fisher(RMatrix::Zero(2, 2)), unidentifiable_error);
}

TEST_CASE("direct-link TM position CRBs decrease with transmit power") {
  // the trace form mixes metres with watts, so the monotone quantity is the
  // per-position-axis bound
  double prev_x = 1e300, prev_z = 1e300;
  for (double g_dbm : {0.0, 10.0, 20.0}) {
    auto sc = direct_scenario(g_dbm);
    auto op = std::make_shared<TrueChannelOp>(sc);
    const RVector q = pack_estimate(sc.source_positions, sc.g_watts);
    const auto model = tm_covariance_model(op, sc.sigma2_watt, sc.source_plane_y());
    const RMatrix j = fisher_information(model, q, sc.t, default_fd_deltas(q));
    const RVector axes = crb_axes_from_fisher(j);
    CHECK(axes(0) < prev_x);
    CHECK(axes(1) < prev_z);
    CHECK(axes(0) > 0.0);
    prev_x = axes(0);
    prev_z = axes(1);
    CHECK(crb_from_fisher(j) > 0.0);
  }
}

TEST_CASE("profile CRB evaluator agrees with the generic path") {
  auto sc = small_ris_scenario(0.0);
  const RVector q = pack_estimate(sc.source_positions, sc.g_watts);
  const RVector deltas = default_fd_deltas(q);

  Rng rng(33);
  RVector f(sc.n_ris());
  for (int i = 0; i < f.size(); ++i) f(i) = 100.0 * rng.normal();

  RisCrbEvaluator eval(sc, ChannelModelKind::NFMC, q, sc.t, deltas);
  eval.set_profile(f);

  const Manifold mm = sc.manifold(ChannelModelKind::NFMC, &f);
  const auto model = mm_covariance_model(mm, sc.sigma2_watt, sc.source_plane_y());
  const double crb_ref = crb_from_fisher(fisher_information(model, q, sc.t, deltas));
  CHECK(eval.crb() == doctest::Approx(crb_ref).epsilon(1e-8));

  // candidate evaluation through the rank-one update matches a full refresh
  const int coord = 7;
  const double cand = -140.0;
  const double fast = eval.crb_with(coord, cand);
  RVector f2 = f;
  f2(coord) = cand;
  RisCrbEvaluator eval2(sc, ChannelModelKind::NFMC, q, sc.t, deltas);
  eval2.set_profile(f2);
  CHECK(fast == doctest::Approx(eval2.crb()).epsilon(1e-6));

  // committing reproduces the candidate value and keeps state consistent
  eval.commit(coord, cand);
  CHECK(eval.crb() == doctest::Approx(fast).epsilon(1e-6));
  CHECK(eval.profile()(coord) == cand);
}

TEST_CASE("profile optimization on a finite alphabet") {
  auto sc = small_ris_scenario(0.0);
  const RVector q = pack_estimate(sc.source_positions, sc.g_watts);
  RisCrbEvaluator eval(sc, ChannelModelKind::NFMC, q, sc.t, default_fd_deltas(q));

  Rng rng(44);
  RVector f0(sc.n_ris());
  for (int i = 0; i < f0.size(); ++i) f0(i) = 100.0 * rng.normal();

  const auto area = OptimizationArea::finite({-100.0, 100.0});
  RisOptimizeOptions opts;
  const auto res = optimize_ris_profile(eval, area, f0, opts);

  // monotone trace and termination
  for (size_t i = 1; i < res.crb_trace.size(); ++i)
    CHECK(res.crb_trace[i] <= res.crb_trace[i - 1] * (1.0 + 1e-12));
  CHECK(res.sweeps <= opts.max_sweeps);
  CHECK(res.crb_final <= res.crb_trace.front());
  for (int i = 0; i < res.f.size(); ++i)
    CHECK((res.f(i) == -100.0 || res.f(i) == 100.0));

  // the final sweep changes nothing (fixed point of the tie-keeping rule)
  RisCrbEvaluator eval2(sc, ChannelModelKind::NFMC, q, sc.t, default_fd_deltas(q));
  const auto res2 = optimize_ris_profile(eval2, area, res.f, opts);
  CHECK(res2.sweeps == 1);
  CHECK(res2.f == res.f);
}

TEST_CASE("continuous optimization improves the CRB") {
  auto sc = small_ris_scenario(0.0);
  const RVector q = pack_estimate(sc.source_positions, sc.g_watts);
  RisCrbEvaluator eval(sc, ChannelModelKind::NFMC, q, sc.t, default_fd_deltas(q));
  Rng rng(55);
  RVector f0(sc.n_ris());
  for (int i = 0; i < f0.size(); ++i) f0(i) = 100.0 * rng.normal();

  RisOptimizeOptions opts;
  opts.max_sweeps = 3;
  const auto res = optimize_ris_profile(eval, OptimizationArea::continuous(-500, 500), f0, opts);
  CHECK(res.crb_final < res.crb_trace.front());
  for (size_t i = 1; i < res.crb_trace.size(); ++i)
    CHECK(res.crb_trace[i] <= res.crb_trace[i - 1] * (1.0 + 1e-12));
}

TEST_CASE("two-stage protocol on a small scenario") {
  auto sc = small_ris_scenario(10.0);
  TwoStageOptions opts;
  opts.area = OptimizationArea::finite({-100.0, 100.0});
  opts.grid = SearchGrid::centered(-1.5, 3.0, 1.0, 1.0, 11, 11, -1.0);
  opts.opt.max_sweeps = 20;
  opts.loc.refine_outliers = false;

  Rng ref_rng(42);
  const auto ref = lr_reference_distribution(sc.n(), opts.t2, 2000, ref_rng);

  Rng rng(4242);
  const auto res = two_stage_localize(sc, opts, ref, rng);
  REQUIRE(!res.early_no_source);
  CHECK(res.stage1_m_hat >= 1);
  REQUIRE(!res.crb_trace.empty());
  for (size_t i = 1; i < res.crb_trace.size(); ++i)
    CHECK(res.crb_trace[i] <= res.crb_trace[i - 1] * (1.0 + 1e-12));
  CHECK(res.crb_optimized <= res.crb_trace.front());
  CHECK(res.final.m_hat >= 1);
  CHECK(res.f_optimized.size() == sc.n_ris());

  // noise-only stage 1 flags an early return
  auto quiet = small_ris_scenario(-300.0);
  Rng rng2(77);
  const auto res2 = two_stage_localize(quiet, opts, ref, rng2);
  CHECK(res2.early_no_source);
  CHECK(res2.stage1_m_hat == 0);
}
