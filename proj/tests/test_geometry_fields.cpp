#include <gtest/gtest.h>

#include <random>

#include "nahm_oper/suites.hpp"

using namespace nahm;

namespace {

/// Composite Simpson rule for the node-map density dxi/dy on [lo, hi].
double xi_length(double lo, double hi, double a, double b) {
  const int k = 20000;
  auto f = [&](double y) { return std::sqrt(a * a * y * y + b * b) / (a * b * y); };
  const double L = std::log(hi / lo);
  // integrate in u = log y to resolve the 1/y density
  double acc = 0.0;
  for (int i = 0; i <= k; ++i) {
    const double u = std::log(lo) + L * i / k, y = std::exp(u);
    const double w = (i == 0 || i == k) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * f(y) * y;
  }
  return acc * L / (3.0 * k);
}

Mat random_unitary(int n, std::mt19937& rng) {
  const HermEig e = herm_eig(random_hermitian(n, rng, 2.0));
  return e.U * (I * e.w.cast<cplx>()).array().exp().matrix().asDiagonal() * e.U.adjoint();
}

UnitaryFields conjugate(const UnitaryFields& f, const Mat& g) {
  UnitaryFields r = f;
  for (auto* x : {&r.A_z, &r.phi_z, &r.phi_1, &r.A_y, &r.dA_z, &r.dphi_z, &r.dphi_1, &r.dA_y})
    for (auto& a : *x) a = g * a * g.adjoint();
  return r;
}

}  // namespace

TEST(Mesh, NodeCountsAndGrading) {
  const GradedMesh m = make_mesh(1e-3, 12.0, 200, 1.08);
  ASSERT_EQ(m.ny(), 200);
  EXPECT_DOUBLE_EQ(m.y.front(), 1e-3);
  EXPECT_DOUBLE_EQ(m.y.back(), 12.0);
  int below = 0;
  for (double y : m.y) below += y < 1.0;
  EXPECT_EQ(below, 92);
  // independent oracle: nodes are equispaced in xi, so the count below 1 follows from the xi-lengths
  const double h = xi_length(1e-3, 12.0, m.map_a, m.map_b) / 199.0;
  EXPECT_EQ(below, int(std::floor(xi_length(1e-3, 1.0, m.map_a, m.map_b) / h)) + 1);
  EXPECT_NEAR(m.y[1] / m.y[0], 1.08, 1e-3);
  for (int i = 1; i < m.ny(); ++i) EXPECT_GT(m.y[i], m.y[i - 1]);
}

TEST(Mesh, RefinementNestsAndHalvesSpacing) {
  const GradedMesh m = make_mesh(1e-2, 12.0, 100, 1.1664);
  const GradedMesh r = refine_mesh(m);
  ASSERT_EQ(r.ny(), 2 * m.ny() - 1);
  for (int i = 0; i < m.ny(); ++i) EXPECT_NEAR(r.y[2 * i], m.y[i], 1e-12 * std::max(1.0, m.y[i]));
  EXPECT_NEAR(r.y[1] / r.y[0], std::sqrt(m.y[1] / m.y[0]), 1e-3);
}

TEST(Mesh, Errors) {
  EXPECT_THROW(make_mesh(1e-3, 0.5, 200, 1.08), domain_error);
  EXPECT_THROW(make_mesh(1e-3, 12.0, 200, 1.0), domain_error);
  EXPECT_THROW(make_mesh(1e-3, 12.0, 40, 1.08), domain_error);
}

TEST(Mesh, SingleCellTorusHasZeroZStencil) {
  const GradedMesh m = make_mesh(1e-2, 12.0, 60, 1.2);
  std::mt19937 rng(1);
  Field f(m.size());
  for (auto& a : f) a = random_complex(2, rng);
  EXPECT_EQ(maxabs(dhol(m, f)), 0.0);
  EXPECT_EQ(maxabs(dahol(m, f)), 0.0);
}

TEST(Mesh, DerivativeStencilsAreSecondOrder) {
  std::vector<double> err;
  GradedMesh m = make_mesh(1e-2, 12.0, 100, 1.1664);
  for (int l = 0; l < 3; ++l) {
    Field f(m.size());
    for (int i = 0; i < m.ny(); ++i) f[i] = Mat::Constant(1, 1, std::sin(m.y[i]));
    const Field d = dy(m, f), dd = dyy(m, f);
    double e = 0.0;
    for (int i = 1; i + 1 < m.ny(); ++i)
      e = std::max({e, std::abs(d[i](0, 0).real() - std::cos(m.y[i])), std::abs(dd[i](0, 0).real() + std::sin(m.y[i]))});
    err.push_back(e);
    m = refine_mesh(m);
  }
  EXPECT_GT(last_order(err), 1.8);
}

TEST(ChernFields, ZeroDataGivesZeroFields) {
  const GradedMesh m = make_mesh(1e-2, 12.0, 60, 1.2);
  const HoloData h = make_holo(Mat::Zero(2, 2), 0.2);
  const Background bg = identity_background(m, 2);
  const UnitaryFields f = chern_fields(m, h, bg, {zero_field(m, 2), bg.id});
  for (const auto* x : {&f.A_z, &f.phi_z, &f.phi_1, &f.A_y}) EXPECT_EQ(maxabs(*x), 0.0);
}

TEST(ChernFields, ModelFrameReproducesTiltedNahmPole) {
  const double beta = 0.2, sb = std::sin(beta), cb = std::cos(beta);
  const GradedMesh m = make_mesh(1e-2, 12.0, 200, 1.08);
  for (int n : {2, 3, 4}) {
    const auto t = principal_triple(n);
    const HoloData h = oper_local_frame(make_oper(n, beta, std::vector<cplx>(n - 1, cplx(0.0))));
    const Background bg = model_background(m, n);
    const UnitaryFields f = chern_fields(m, h, bg, {zero_field(m, n), bg.id});
    double e = 0.0;
    for (int i = 0; i < m.ny(); ++i) {
      const double y = m.y[i];
      e = std::max({e, maxabs(y * f.A_z[i] - sb * t.e_plus), maxabs(y * f.phi_z[i] - cb * t.e_plus),
                    maxabs(y * f.phi_1[i] - 0.5 * I * cb * t.e_zero), maxabs(f.A_y[i])});
    }
    EXPECT_LT(e, 1e-12) << n;
  }
}

TEST(ChernFields, RandomDeformationIsUnitary) {
  const GradedMesh m = make_mesh(1e-2, 12.0, 120, 1.12);
  const HoloData h = oper_local_frame(make_oper(3, 0.25, {cplx(0.4), cplx(0.1, 0.2)}));
  const Background bg = model_background(m, 3);
  const Field s = window_field(m, 3, 11, 0.7, 0.05, 9.0);
  const UnitaryFields f = chern_fields(m, h, bg, {s, bg.id});
  EXPECT_NO_THROW(check_unitary(f, 1e-12));
}

TEST(ChernFields, RejectsForeignBackground) {
  const GradedMesh m = make_mesh(1e-2, 12.0, 60, 1.2);
  const HoloData h = make_holo(principal_triple(2).e_plus, 0.2);
  const Background bg = model_background(m, 2);
  EXPECT_THROW(chern_fields(m, h, bg, {zero_field(m, 2), "other"}), domain_error);
}

TEST(ChernFields, AdmissibleMetricHasNahmPoleRate) {
  const double beta = 0.2;
  const GradedMesh m = make_mesh(1e-2, 12.0, 200, 1.08);
  const OperPoint op = make_oper(2, beta, {cplx(0.5)});
  const HoloData h = oper_local_frame(op);
  const Background bg = admissible_background(m, build_H0(op, 2));
  const UnitaryFields f = chern_fields(m, h, bg, {zero_field(m, 2), bg.id});
  const auto t = principal_triple(2);
  std::vector<double> lx, ly;
  for (int i = 1; i <= 6; ++i) {
    lx.push_back(std::log(m.y[i]));
    ly.push_back(std::log(maxabs(m.y[i] * f.A_z[i] - std::sin(beta) * t.e_plus)));
  }
  const double slope = (ly.back() - ly.front()) / (lx.back() - lx.front());
  EXPECT_GT(slope, 0.5);
}

TEST(MomentMap, ModelSolutionVanishes) {
  const GradedMesh m = benchmark_mesh();
  for (int n : {2, 3, 4}) {
    const HoloData h = oper_local_frame(make_oper(n, 0.2, std::vector<cplx>(n - 1, cplx(0.0))));
    const Background bg = model_background(m, n);
    EXPECT_LT(interior_max(m, moment_map(m, h, bg, {zero_field(m, n), bg.id})), 1e-10) << n;
  }
}

TEST(MomentMap, CosineFrameLeavesInverseSquareResidual) {
  // g_m built with cos(beta) instead of sin(beta): a constant exponent -log(cot b) e0 on top of the sin frame
  const double beta = 0.2;
  const GradedMesh m = benchmark_mesh();
  const HoloData h = oper_local_frame(make_oper(2, beta, {cplx(0.0)}));
  Background bg = model_background(m, 2, "cos");
  const Mat shift = -std::log(std::cos(beta) / std::sin(beta)) * principal_triple(2).e_zero;
  for (auto& s : bg.sigma) s = shift;
  const Field om = moment_map(m, h, bg, {zero_field(m, 2), bg.id});
  std::vector<double> scaled_res;
  for (int i : {5, 50, 120}) scaled_res.push_back(maxabs(om[i]) * m.y[i] * m.y[i]);
  for (double r : scaled_res) {
    EXPECT_GT(r, 0.1);
    EXPECT_NEAR(r, scaled_res.front(), 1e-6 * scaled_res.front());
  }
}

TEST(ResidualSystems, ModelSolutionVanishesInAllFour) {
  const GradedMesh m = benchmark_mesh();
  for (int n : {2, 3, 4})
    for (double b : {0.1, 0.2, 0.3}) EXPECT_LT(model_max_residual(n, b, m), 1e-10) << n << " " << b;
}

TEST(ResidualSystems, ExactLinearRelationsOnRandomFields) {
  const GradedMesh m = make_mesh(1e-2, 12.0, 60, 1.2, 4, 1.0);
  for (unsigned seed = 1; seed <= 20; ++seed) {
    const int n = 2 + seed % 3;
    EXPECT_LT(equivalence_discrepancy(m, random_fields(m, n, seed), 0.05 + 0.02 * seed), 1e-9) << seed;
  }
}

TEST(ResidualSystems, SmallTiltCommutatorLimit) {
  const GradedMesh m = make_mesh(1e-2, 12.0, 60, 1.2, 4, 1.0);
  const UnitaryFields f = random_fields(m, 2, 3);
  const SystemResiduals S = commutator_residuals(m, f, 1e-6);
  const Field hol = hitchin_residual(m, f).second;
  double err = 0.0, scale = 0.0;
  for (int k = 0; k < m.size(); ++k) {
    err = std::max(err, maxabs(S.I12[k] + 2.0 * hol[k]));
    scale = std::max(scale, maxabs(hol[k]));
  }
  EXPECT_GT(scale, 1e-3);
  EXPECT_LT(err, 1e-5 * scale);
}

TEST(ResidualSystems, UntwistedGebeDropsBracketTerm) {
  const GradedMesh m = make_mesh(1e-2, 12.0, 60, 1.2, 4, 1.0);
  const UnitaryFields f = random_fields(m, 3, 5);
  const Field zero = zero_field(m, 3);
  const GebeResiduals g0 = gebe_residuals(m, f, 1.0, &zero, &zero);
  const ComponentAtoms a = component_atoms(m, f);
  std::mt19937 rng(2);
  Field A1(m.size());
  for (auto& x : A1) x = aherm_part(random_complex(3, rng));
  const GebeResiduals g1 = gebe_residuals(m, f, 1.0, &A1, &zero);
  double e0 = 0.0, e1 = 0.0;
  for (int iy = 1; iy + 1 < m.ny(); ++iy)
    for (int iz = 0; iz < m.nz(); ++iz) {
      const int k = m.index(iy, iz);
      e0 = std::max(e0, maxabs(g0.G3[k] + 2.0 * a.Y[k]));
      e1 = std::max(e1, maxabs(g1.G3[k] - g0.G3[k] + comm(f.phi_1[k], A1[k])));
    }
  EXPECT_LT(e0, 1e-10);
  EXPECT_LT(e1, 1e-12);
}

TEST(ResidualSystems, EquivariantUnderConstantUnitaryConjugation) {
  const GradedMesh m = make_mesh(1e-2, 12.0, 60, 1.2, 4, 1.0);
  std::mt19937 rng(4);
  const double beta = 0.17;
  const UnitaryFields f = random_fields(m, 3, 9);
  const Mat g = random_unitary(3, rng);
  const UnitaryFields fg = conjugate(f, g);
  auto check = [&](const auto& r, const auto& rg) {
    const auto a = r.all(), b = rg.all();
    double e = 0.0;
    for (size_t q = 0; q < a.size(); ++q)
      for (int k = 0; k < m.size(); ++k) e = std::max(e, maxabs(g * (*a[q])[k] * g.adjoint() - (*b[q])[k]));
    return e;
  };
  EXPECT_LT(check(tebe_residuals(m, f, beta), tebe_residuals(m, fg, beta)), 1e-11);
  EXPECT_LT(check(reduced_residuals(m, f, beta), reduced_residuals(m, fg, beta)), 1e-11);
  EXPECT_LT(check(commutator_residuals(m, f, beta), commutator_residuals(m, fg, beta)), 1e-11);
  const double t = tilt_params(beta).t;
  EXPECT_LT(check(gebe_residuals(m, f, t, nullptr, nullptr, beta), gebe_residuals(m, fg, t, nullptr, nullptr, beta)),
            1e-11);
}

TEST(ResidualSystems, CovariantDerivativeIntegrationByParts) {
  // <D_y a, b> + <a, D_y b> = 0 for compactly supported a, b and anti-Hermitian A_y; the discrete defect is O(h^2)
  std::vector<double> err;
  GradedMesh m = make_mesh(1e-2, 12.0, 100, 1.1664);
  for (int l = 0; l < 3; ++l) {
    const Field a = window_field(m, 2, 1, 1.0, 0.1, 8.0), b = window_field(m, 2, 2, 1.0, 0.1, 8.0);
    Field Ay(m.size());
    for (int i = 0; i < m.ny(); ++i) Ay[i] = I * std::sin(0.5 * m.y[i]) * principal_triple(2).e_zero;
    const Field da = dy(m, a), db = dy(m, b);
    const auto w = trapezoid_weights(m);
    double acc = 0.0;
    for (int i = 0; i < m.ny(); ++i) {
      const Mat Da = da[i] + comm(Ay[i], a[i]), Db = db[i] + comm(Ay[i], b[i]);
      acc += w[i] * ((Da * b[i].adjoint()).trace() + (a[i] * Db.adjoint()).trace()).real();
    }
    err.push_back(std::abs(acc));
    m = refine_mesh(m);
  }
  EXPECT_GT(last_order(err), 1.8);
}

TEST(WeightedNorm, Examples) {
  const GradedMesh m = make_mesh(1e-3, 12.0, 200, 1.08);
  Field u(m.size()), r(m.size());
  for (int i = 0; i < m.ny(); ++i) {
    u[i] = Mat::Constant(1, 1, m.y[i] * m.y[i]);
    r[i] = Mat::Constant(1, 1, std::sqrt(m.y[i]));
  }
  const WeightedNorm a = weighted_norm(m, u, 1.0, -1.0, 2);
  EXPECT_FALSE(a.divergent);
  EXPECT_TRUE(std::isfinite(a.value));
  // y^{1/2} with mu = 1 scales like y_min^{-1/2}
  const GradedMesh m2 = make_mesh(1e-5, 12.0, 300, 1.08);
  Field r2(m2.size());
  for (int i = 0; i < m2.ny(); ++i) r2[i] = Mat::Constant(1, 1, std::sqrt(m2.y[i]));
  const double v1 = weighted_norm(m, r, 1.0, 0.0, 0).value, v2 = weighted_norm(m2, r2, 1.0, 0.0, 0).value;
  EXPECT_NEAR(v2 / v1, 10.0, 1e-6);
  const GradedMesh m3 = make_mesh(1e-14, 12.0, 600, 1.08);
  Field r3(m3.size());
  for (int i = 0; i < m3.ny(); ++i) r3[i] = Mat::Constant(1, 1, std::sqrt(m3.y[i]));
  EXPECT_TRUE(weighted_norm(m3, r3, 1.0, 0.0, 1).divergent);
  // regularized model field y A_z with mu = 0
  const UnitaryFields f = model_fields(2, 0.2, m);
  Field yA(m.size());
  for (int i = 0; i < m.ny(); ++i) yA[i] = m.y[i] * f.A_z[i];
  EXPECT_FALSE(weighted_norm(m, yA, 0.0, -0.5, 2).divergent);
  EXPECT_THROW(weighted_norm(m, u, 1.0, 0.5, 3), domain_error);
}
