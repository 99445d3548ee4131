#include <gtest/gtest.h>

#include "nahm_oper/suites.hpp"

using namespace nahm;

namespace {

const GradedMesh& mesh() {
  static const GradedMesh m = benchmark_mesh();
  return m;
}

const ContinuityResult& half_solve() {
  static const ContinuityResult r = continuity_solve(make_oper(2, 0.2, {cplx(0.5)}), mesh());
  return r;
}

}  // namespace

TEST(NormalOperator, CubicCorrectionExample) {
  const GradedMesh& m = mesh();
  const HoloData h = oper_local_frame(make_oper(2, 0.2, {cplx(0.0)}));
  const Background bg = model_background(m, 2);
  const Mat e0 = principal_triple(2).e_zero;
  const double Y = m.y.back();
  Field u(m.size());
  for (int i = 0; i < m.ny(); ++i) u[i] = (m.y[i] * m.y[i] - std::pow(m.y[i], 3) / Y) * e0;
  const Field Lu = apply_L(m, h, bg, zero_field(m, 2), u);
  double err = 0.0;
  for (int i = 1; i + 1 < m.ny(); ++i) err = std::max(err, maxabs(Lu[i] - 4.0 * m.y[i] / Y * e0));
  EXPECT_LT(err, 1e-3);
}

TEST(NormalOperator, SymmetricAndPositiveOnCompactFields) {
  const HoloData h = oper_local_frame(make_oper(2, 0.2, {cplx(0.5)}));
  std::vector<double> asym;
  GradedMesh m = make_mesh(1e-2, 12.0, 100, 1.1664);
  for (int l = 0; l < 3; ++l) {
    const Background bg = admissible_background(m, build_H0(make_oper(2, 0.2, {cplx(0.5)}), 2));
    const Field s = zero_field(m, 2);
    const Field u = window_field(m, 2, 1, 0.5, 0.1, 8.0), v = window_field(m, 2, 2, 0.5, 0.1, 8.0);
    const double uv = weighted_inner(m, apply_L(m, h, bg, s, u), v), vu = weighted_inner(m, u, apply_L(m, h, bg, s, v));
    asym.push_back(std::abs(uv - vu) / std::abs(uv));
    EXPECT_GT(weighted_inner(m, apply_L(m, h, bg, s, u), u), 0.0);
    m = refine_mesh(m);
  }
  EXPECT_LT(asym.back(), 1e-3);
  EXPECT_GT(last_order(asym), 1.8);
}

TEST(NormalOperator, RoutesAgree) {
  const OrderEstimate o = weitzenbock_order(oper_local_frame(make_oper(2, 0.2, {cplx(0.5)})),
                                            make_mesh(1e-2, 10.0, 100, 1.1664), 3, 4);
  EXPECT_GT(o.order, 1.8);
}

TEST(ContinuityEquation, KappaShiftSolvesTheFirstStage) {
  const GradedMesh& m = mesh();
  const HoloData h = oper_local_frame(make_oper(2, 0.2, {cplx(0.5)}));
  const Background start = admissible_background(m, build_H0(make_oper(2, 0.2, {cplx(0.5)}), 2));
  const auto [bg0, s] = kappa_shift(m, h, start);
  // second-difference stencils amplify roundoff in the re-factored exponent by about h^-2
  EXPECT_LT(interior_max(m, Nt_residual(m, h, bg0, s, 1.0)), 1e-8);
}

TEST(ContinuityEquation, ExactSolutionHasZeroResidualForAllT) {
  const GradedMesh& m = mesh();
  const HoloData h = oper_local_frame(make_oper(3, 0.2, {cplx(0.0), cplx(0.0)}));
  for (double t : {1.0, 0.25, 0.0}) EXPECT_LT(maxabs(Nt_residual(m, h, model_background(m, 3), zero_field(m, 3), t)), 1e-10);
}

TEST(Schedule, DefaultAndValidation) {
  const auto s = default_schedule();
  ASSERT_EQ(s.size(), 12u);
  EXPECT_EQ(s.front(), 1.0);
  EXPECT_EQ(s[10], std::ldexp(1.0, -10));
  EXPECT_EQ(s.back(), 0.0);
  EXPECT_NO_THROW(check_schedule(s));
  EXPECT_THROW(check_schedule({1.0, 0.5}), config_error);
  EXPECT_THROW(check_schedule({1.0, 0.5, 0.5, 0.0}), config_error);
  EXPECT_THROW(check_schedule({}), config_error);
}

TEST(Continuity, ZeroDifferentialsReturnTheModel) {
  const ContinuityResult r = continuity_solve(make_oper(3, 0.2, {cplx(0.0), cplx(0.0)}), mesh());
  EXPECT_LT(maxabs(r.s), 1e-9);
  EXPECT_LT(r.report.omega_sup, 1e-8);
}

TEST(Continuity, SolvesAndReportsTheBoundaryData) {
  const ContinuityResult& r = half_solve();
  EXPECT_LT(r.report.omega_sup, 1e-8);
  EXPECT_EQ(r.report.last_good_t, 0.0);
  EXPECT_FALSE(r.report.history.empty());
  EXPECT_FALSE(r.report.s_weighted.divergent);
  EXPECT_LT(kh_error(make_oper(2, 0.2, {cplx(0.5)}), kobayashi_hitchin(r.report.flat_pair, 0.2)), 1e-4);
}

TEST(Continuity, PerturbedStartConvergesToTheSameMetric) {
  ContinuityOptions o;
  o.perturb_amplitude = 0.3;
  o.seed = 5;
  const ContinuityResult p = continuity_solve(make_oper(2, 0.2, {cplx(0.5)}), mesh(), o);
  EXPECT_LT(metric_distance(p.sigma, half_solve().sigma), 1e-6);
}

TEST(Continuity, CoarseScheduleReachesTheSameSolution) {
  ContinuityOptions o;
  o.schedule = {1.0, 0.25, 0.0};
  const ContinuityResult p = continuity_solve(make_oper(2, 0.2, {cplx(0.5)}), mesh(), o);
  EXPECT_LT(metric_distance(p.sigma, half_solve().sigma), 1e-6);
}

TEST(Continuity, RejectsTorusMesh) {
  EXPECT_THROW(continuity_solve(make_oper(2, 0.2, {cplx(0.5)}), make_mesh(1e-2, 12.0, 60, 1.2, 4, 1.0)), dimension_error);
}

TEST(Continuity, SolutionConvergesAtSecondOrder) {
  ContinuityOptions o;
  o.schedule = {1.0, 0.25, 0.0};
  const OrderEstimate e = solution_order(make_oper(2, 0.2, {cplx(0.5)}), make_mesh(1e-2, 12.0, 100, 1.1664), 3, o);
  EXPECT_GT(e.order, 1.8);
}

TEST(KeyEquation, ZeroDeformationHasNoDefect) {
  const GradedMesh& m = mesh();
  const HoloData h = oper_local_frame(make_oper(2, 0.2, {cplx(0.5)}));
  EXPECT_EQ(keyeq_check(m, h, model_background(m, 2), zero_field(m, 2)), 0.0);
}

TEST(KeyEquation, CommutingDataSatisfyTheDiscreteIdentity) {
  const GradedMesh& m = mesh();
  const HoloData h = make_holo(Mat::Zero(2, 2), 0.2);
  Field s = window_field(m, 2, 3, 0.2, 0.1, 8.0);
  const Mat e0 = principal_triple(2).e_zero;
  for (auto& x : s) x = (0.5 * (x * e0).trace().real()) * e0;
  EXPECT_LT(keyeq_check(m, h, identity_background(m, 2), s), 1e-9);
}

TEST(KeyEquation, DefectConvergesAtSecondOrder) {
  const OrderEstimate o = keyeq_order(oper_local_frame(make_oper(2, 0.2, {cplx(0.5)})),
                                      make_mesh(1e-2, 10.0, 100, 1.1664), 3, 4);
  EXPECT_GT(o.order, 1.8);
  EXPECT_NEAR(o.errors[1] / o.errors[2], 4.0, 1.2);
}

TEST(Donaldson, VanishesAtZeroAndMatchesDerivatives) {
  const GradedMesh& m = mesh();
  const OperPoint op = make_oper(2, 0.2, {cplx(0.5)});
  const HoloData h = oper_local_frame(op);
  const Background K = admissible_background(m, build_H0(op, 2));
  EXPECT_EQ(donaldson_M(m, h, K, zero_field(m, 2)), 0.0);
  const Field s = window_field(m, 2, 7, 0.5, 0.1, 8.0);
  const double t = 0.3, e = 1e-3;
  const double fd = (donaldson_M(m, h, K, scaled(s, t + e)) - donaldson_M(m, h, K, scaled(s, t - e))) / (2.0 * e);
  const DonaldsonDerivatives d = donaldson_derivatives(m, h, K, s, t);
  EXPECT_LT(std::abs(fd - d.first), 1e-6 * std::max(1.0, std::abs(d.first)));
  EXPECT_GT(d.second, 0.0);
  EXPECT_GT(donaldson_derivatives(m, h, K, s, 0.0).second, 0.0);
}

TEST(Diagnostics, ComparisonBoundHoldsOnTheSolution) {
  const ContinuityResult& r = half_solve();
  const HoloData h = oper_local_frame(make_oper(2, 0.2, {cplx(0.5)}));
  const Field om0 = moment_map(mesh(), h, r.bg0, {zero_field(mesh(), 2), r.bg0.id});
  const C0Diagnostic c = c0_diagnostic(mesh(), om0, r.s);
  EXPECT_TRUE(c.holds);
  EXPECT_LE(c.sup_s, c.bound);
  const C0Diagnostic z = c0_diagnostic(mesh(), zero_field(mesh(), 2), zero_field(mesh(), 2));
  EXPECT_EQ(z.sup_s, 0.0);
  EXPECT_TRUE(z.holds);
}

TEST(Diagnostics, FiltrationOfTheModel) {
  const GradedMesh& m = mesh();
  for (int n : {2, 3}) {
    const HoloData h = oper_local_frame(make_oper(n, 0.2, std::vector<cplx>(n - 1, cplx(0.0))));
    const DeformedFrame df = deformed_frame(m, h, model_background(m, n), zero_field(m, n));
    const FiltrationResult f = filtration_extract(m, h, df);
    ASSERT_EQ(int(f.rates.size()), n);
    EXPECT_LT(filtration_error(f.rates, n), 0.02) << n;
  }
}

TEST(Diagnostics, AdmissibilityRateOfPowerProfile) {
  const GradedMesh& m = mesh();
  Field s(m.size());
  for (int i = 0; i < m.ny(); ++i) s[i] = std::pow(m.y[i], 1.5) * principal_triple(2).e_zero;
  EXPECT_NEAR(admissibility_rate(m, s), 1.5, 0.02);
}

TEST(KobayashiHitchin, ModelMapsToZero) {
  const ContinuityResult r = continuity_solve(make_oper(2, 0.2, {cplx(0.0)}), mesh());
  const OperPoint got = kobayashi_hitchin(r.report.flat_pair, 0.2);
  EXPECT_LT(std::abs(got.q[0]), 1e-8);
}

TEST(KobayashiHitchin, InvariantUnderUnitaryGauge) {
  const FlatPair& p = half_solve().report.flat_pair;
  const OperPoint a = kobayashi_hitchin(p, 0.2), b = kh_conjugated(p, 0.2, 3);
  EXPECT_LT(std::abs(a.q[0] - b.q[0]), 1e-10);
}

TEST(KobayashiHitchin, RejectsNonFlatSlice) {
  const auto t = principal_triple(2);
  EXPECT_THROW(kobayashi_hitchin({t.e_plus, t.e_minus, cplx(1.0)}, 0.2), convergence_error);
}
