#include <gtest/gtest.h>

#include <random>

#include "nahm_oper/suites.hpp"

using namespace nahm;

namespace {

Mat conj_by(const Mat& g, const Mat& x) { return g * x * g.inverse(); }

}  // namespace

TEST(HitchinSection, Examples) {
  const HiggsData d2 = hitchin_section_higgs(2, {cplx(3.0)});
  Mat e2(2, 2);
  e2 << 0, 1, 3, 0;
  EXPECT_LT(maxabs(d2.phi - e2), 1e-15);
  EXPECT_EQ(maxabs(d2.alpha0), 0.0);
  const HiggsData d3 = hitchin_section_higgs(3, {cplx(1.0), cplx(2.0)});
  EXPECT_EQ(d3.phi(2, 0), cplx(2.0));
  EXPECT_EQ(d3.phi(2, 1), cplx(1.0));
  EXPECT_NEAR(d3.phi(0, 1).real(), std::sqrt(2.0), 1e-15);
  EXPECT_THROW(hitchin_section_higgs(3, {cplx(1.0)}), domain_error);
  EXPECT_THROW(hitchin_section_higgs(1, {}), invalid_rank);
}

TEST(HitchinFibration, RankTwoInvariantIsMinusQ) {
  for (cplx q : {cplx(0.5), cplx(-2.0, 1.0), cplx(0.0, 3.0)}) {
    const auto p = hitchin_fibration(hitchin_section_higgs(2, {q}).phi);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_LT(std::abs(p[0] + q), 1e-14);
  }
}

TEST(HitchinFibration, NilpotentHasZeroInvariants) {
  for (int n = 2; n <= 6; ++n)
    for (cplx p : hitchin_fibration(principal_triple(n).e_plus)) EXPECT_LT(std::abs(p), 1e-12) << n;
}

TEST(HitchinFibration, ConjugationInvariant) {
  std::mt19937 rng(3);
  for (int n = 2; n <= 5; ++n) {
    const Mat phi = random_complex(n, rng);
    const Mat g = detail::random_frame(n, 10 + n, 0.6);
    const auto a = hitchin_fibration(phi), b = hitchin_fibration(conj_by(g, phi));
    for (size_t k = 0; k < a.size(); ++k) EXPECT_LT(std::abs(a[k] - b[k]), 1e-10 * (1.0 + std::abs(a[k])));
  }
}

TEST(HitchinFibration, SectionInverseRoundTrip) {
  std::mt19937 rng(4);
  std::normal_distribution<double> nd;
  for (int n : {2, 3}) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<cplx> q;
      for (int k = 0; k < n - 1; ++k) q.push_back(cplx(nd(rng), nd(rng)));
      const auto back = q_from_p(n, hitchin_fibration(hitchin_section_higgs(n, q).phi));
      for (int k = 0; k < n - 1; ++k) EXPECT_LT(std::abs(back[k] - q[k]), 1e-10) << n;
    }
  }
}

TEST(HitchinConstant, ClosedFormRankTwo) {
  for (double q : {0.25, 0.5, 0.7, 2.0, 4.0}) {
    const MetricSolve s = solve_hitchin_constant(hitchin_section_higgs(2, {cplx(q)}));
    EXPECT_NEAR(s.H(0, 0).real(), std::sqrt(q), 1e-10);
    EXPECT_NEAR(s.H(1, 1).real(), 1.0 / std::sqrt(q), 1e-10);
    EXPECT_LT(std::abs(s.H(0, 1)), 1e-10);
    EXPECT_NEAR(std::abs(s.H.determinant()), 1.0, 1e-12);
  }
  EXPECT_LT(maxabs(solve_hitchin_constant(hitchin_section_higgs(2, {cplx(1.0)})).H - Mat::Identity(2, 2)), 1e-10);
}

TEST(HitchinConstant, RejectsNonHolomorphicData) {
  HiggsData d = hitchin_section_higgs(2, {cplx(1.0)});
  d.alpha0 = principal_triple(2).e_zero;
  EXPECT_THROW(solve_hitchin_constant(d), domain_error);
}

TEST(Twist, UnitParameterWithZeroHiggsFieldIsIdentity) {
  std::mt19937 rng(5);
  HiggsData d{2, random_complex(2, rng), Mat::Zero(2, 2)};
  const Mat H = Mat::Identity(2, 2);
  const FlatPair p = twist(d, H, cplx(1.0));
  EXPECT_LT(maxabs(p.P1 - d.alpha0), 1e-15);
  EXPECT_LT(maxabs(p.P2 + d.alpha0.adjoint()), 1e-15);
}

TEST(Twist, RoundTripAndFlatness) {
  for (cplx q : {cplx(0.5), cplx(1.0, 1.0)}) {
    const HiggsData d = hitchin_section_higgs(2, {q});
    const Mat H = solve_hitchin_constant(d).H;
    for (cplx w : {cplx(0.5), cplx(0.2, 0.7), cplx(0.0, -1.0)}) {
      const FlatPair p = twist(d, H, w);
      EXPECT_LT(flatness_defect(p), 1e-10);
      const HiggsData back = untwist(p, H);
      EXPECT_LT(maxabs(back.alpha0 - d.alpha0), 1e-12);
      EXPECT_LT(maxabs(back.phi - d.phi), 1e-12);
      EXPECT_LT(twisted_residual(p, H), 1e-10);
    }
  }
  EXPECT_THROW(twist(hitchin_section_higgs(2, {cplx(1.0)}), Mat::Identity(2, 2), cplx(0.0)), domain_error);
}

TEST(TwistedHitchin, RecoversMetricFromAnyStart) {
  const HiggsData d = hitchin_section_higgs(3, {cplx(0.4), cplx(0.3, -0.2)});
  const Mat H = solve_hitchin_constant(d).H;
  const FlatPair p = twist(d, H, cplx(0.5));
  const MetricSolve a = solve_twisted_hitchin(p);
  const MetricSolve b = solve_twisted_hitchin(p, detail::random_frame(3, 8).adjoint() * detail::random_frame(3, 8));
  EXPECT_LT(maxabs(a.H - H), 1e-8);
  EXPECT_LT(maxabs(b.H - H), 1e-8);
  EXPECT_LT(a.residual, 1e-10);
}

TEST(TwistedHitchin, GaugeConjugationMovesTheMetric) {
  const HiggsData d = hitchin_section_higgs(2, {cplx(0.7)});
  const Mat H = solve_hitchin_constant(d).H;
  const FlatPair p = twist(d, H, cplx(0.3, 0.4));
  const Mat g = detail::random_frame(2, 9, 0.5);
  const FlatPair pg{conj_by(g, p.P1), conj_by(g, p.P2), p.w};
  const MetricSolve s = solve_twisted_hitchin(pg);
  EXPECT_LT(twisted_residual(pg, s.H), 1e-10);
  const HiggsData split = untwist(pg, s.H);
  EXPECT_LT(hitchin_constant_residual(split, s.H), 1e-9);
  const auto pa = hitchin_fibration(split.phi), pb = hitchin_fibration(d.phi);
  EXPECT_LT(std::abs(pa[0] - pb[0]), 1e-9);
}

TEST(TwistedHitchin, SecondVariationIsPositive) {
  const HiggsData d = hitchin_section_higgs(2, {cplx(0.5)});
  const FlatPair p = twist(d, solve_hitchin_constant(d).H, cplx(0.5));
  std::mt19937 rng(6);
  for (int k = 0; k < 20; ++k) {
    const Mat K = exp_herm(traceless_part(random_hermitian(2, rng, 1.0)));
    const Mat s = traceless_part(random_hermitian(2, rng, 1.0));
    EXPECT_GT(twisted_second_variation(p, K, s), 0.0);
  }
}

TEST(Corlette, SplitOfUnitTwistRecoversHiggsData) {
  const HiggsData d = hitchin_section_higgs(3, {cplx(0.2), cplx(0.5)});
  const Mat H = solve_hitchin_constant(d).H;
  const FlatPair p = twist(d, H, cplx(1.0));
  const HiggsData s = corlette_split(p, solve_twisted_hitchin(p).H);
  EXPECT_LT(hitchin_constant_residual(s, solve_twisted_hitchin(p).H), 1e-9);
  EXPECT_LT(maxabs(s.phi - d.phi), 1e-8);
  EXPECT_THROW(corlette_split(twist(d, H, cplx(0.5)), H), domain_error);
}

TEST(Irreducibility, Examples) {
  const auto t = principal_triple(2);
  EXPECT_TRUE(is_irreducible({t.e_plus, t.e_minus}).irreducible);
  const IrreducibilityResult r = is_irreducible({t.e_plus});
  EXPECT_FALSE(r.irreducible);
  ASSERT_EQ(r.certificate.cols(), 1);
  EXPECT_NEAR(std::abs(r.certificate(0, 0)), 1.0, 1e-12);
  EXPECT_LT(std::abs(r.certificate(1, 0)), 1e-12);
  Mat a = Mat::Zero(3, 3), b = Mat::Zero(3, 3);
  a.topLeftCorner(2, 2) = t.e_plus;
  b.topLeftCorner(2, 2) = t.e_minus;
  a(2, 2) = 1.0;
  EXPECT_FALSE(is_irreducible({a, b}).irreducible);
  EXPECT_THROW(is_irreducible({}), domain_error);
}

TEST(Hyperkahler, ComplexStructures) {
  std::mt19937 rng(7);
  const Mat a = random_complex(2, rng), b = random_complex(2, rng);
  auto near = [](const std::pair<Mat, Mat>& x, const Mat& u, const Mat& v) {
    return std::max(maxabs(x.first - u), maxabs(x.second - v));
  };
  EXPECT_LT(near(hyperkahler_Iw(cplx(0.0), a, b), I * a, I * b), 1e-15);
  EXPECT_LT(near(hyperkahler_Iw(cplx(1.0), a, b), -b.adjoint(), a.adjoint()), 1e-15);
  EXPECT_LT(near(hyperkahler_Iw(cplx(0.0, 1.0), a, b), -I * b.adjoint(), I * a.adjoint()), 1e-15);
  for (cplx w : {cplx(0.0), cplx(0.3, -0.8), cplx(2.0, 1.0)}) {
    const auto once = hyperkahler_Iw(w, a, b);
    EXPECT_LT(near(hyperkahler_Iw(w, once.first, once.second), -a, -b), 1e-13);
  }
}

TEST(BoundaryMetric, NilpotentDataIsReducible) {
  const HoloData h = oper_local_frame(make_oper(2, 0.2, {cplx(0.0)}));
  try {
    boundary_metric(h.alpha, 0.2);
    FAIL() << "expected reducible_error";
  } catch (const reducible_error& e) {
    EXPECT_EQ(e.certificate.cols(), 1);
  }
}

TEST(BoundaryMetric, RankTwoClosedForm) {
  for (double beta : {0.1, 0.2, 0.3})
    for (double q : {0.25, 0.5, 1.0}) {
      const HoloData h = oper_local_frame(make_oper(2, beta, {cplx(q)}));
      const MetricSolve s = boundary_metric(h.alpha, beta);
      const double c = q / std::sin(beta);
      EXPECT_NEAR(s.H(0, 0).real(), std::sqrt(c), 1e-9) << beta << " " << q;
      EXPECT_NEAR(s.H(1, 1).real(), 1.0 / std::sqrt(c), 1e-9);
      EXPECT_LT(std::abs(s.H(0, 1)), 1e-9);
    }
}
