#include <gtest/gtest.h>

#include <random>

#include "nahm_oper/identities.hpp"

using namespace nahm;

namespace {

double inner(const Mat& a, const Mat& b) { return (a * b.adjoint()).trace().real(); }

Mat random_traceless(int n, std::mt19937& rng) { return random_complex(n, rng); }

}  // namespace

TEST(PrincipalTriple, RankTwo) {
  const auto t = principal_triple(2);
  Mat ep(2, 2), e0(2, 2);
  ep << 0, 1, 0, 0;
  e0 << 1, 0, 0, -1;
  EXPECT_LT(maxabs(t.e_plus - ep), 1e-15);
  EXPECT_LT(maxabs(t.e_zero - e0), 1e-15);
  EXPECT_LT(maxabs(t.e_minus - ep.transpose()), 1e-15);
}

TEST(PrincipalTriple, RankThree) {
  const auto t = principal_triple(3);
  EXPECT_NEAR(t.e_plus(0, 1).real(), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(t.e_plus(1, 2).real(), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(t.e_plus(0, 2), cplx(0.0));
  EXPECT_NEAR(t.e_zero(0, 0).real(), 2.0, 0.0);
  EXPECT_NEAR(t.e_zero(1, 1).real(), 0.0, 0.0);
  EXPECT_NEAR(t.e_zero(2, 2).real(), -2.0, 0.0);
}

TEST(PrincipalTriple, RelationsHoldForRanksTwoToEight) {
  for (int n = 2; n <= 8; ++n) {
    const auto t = principal_triple(n);
    EXPECT_LT(maxabs(comm(t.e_zero, t.e_plus) - 2.0 * t.e_plus), 1e-12) << n;
    EXPECT_LT(maxabs(comm(t.e_zero, t.e_minus) + 2.0 * t.e_minus), 1e-12) << n;
    EXPECT_LT(maxabs(comm(t.e_plus, t.e_minus) - t.e_zero), 1e-12) << n;
  }
}

TEST(PrincipalTriple, RejectsRankBelowTwo) {
  EXPECT_THROW(principal_triple(1), invalid_rank);
  EXPECT_THROW(casimir_spectrum(1), invalid_rank);
  EXPECT_THROW(indicial_roots(0), invalid_rank);
}

TEST(Casimir, TripleElementsAreEigenvectorsWithEigenvalueTwo) {
  for (int n = 2; n <= 5; ++n) {
    const auto t = principal_triple(n);
    // direct nested brackets: [e+, [e-, e0]] = [e+, 2e-] = 2e0, [e-, [e+, e0]] = [e-, -2e+] = 2e0, [e0, [e0, e0]] = 0
    EXPECT_LT(maxabs(casimir_apply(t, t.e_zero) - 2.0 * t.e_zero), 1e-12);
    EXPECT_LT(maxabs(casimir_apply(t, t.e_plus) - 2.0 * t.e_plus), 1e-12);
    EXPECT_EQ(maxabs(casimir_apply(t, Mat::Zero(n, n))), 0.0);
  }
}

TEST(Casimir, SpectrumRankTwoAndThree) {
  const auto s2 = casimir_spectrum(2);
  ASSERT_EQ(s2.size(), 3u);
  for (double x : s2) EXPECT_NEAR(x, 2.0, 1e-12);
  const auto s3 = casimir_spectrum(3);
  ASSERT_EQ(s3.size(), 8u);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s3[i], 2.0, 1e-12);
  for (int i = 3; i < 8; ++i) EXPECT_NEAR(s3[i], 6.0, 1e-12);
}

TEST(Casimir, SymmetricForTraceInnerProduct) {
  std::mt19937 rng(3);
  for (int n = 2; n <= 6; ++n) {
    const auto t = principal_triple(n);
    for (int k = 0; k < 10; ++k) {
      const Mat a = random_traceless(n, rng), b = random_traceless(n, rng);
      EXPECT_LT(std::abs(inner(casimir_apply(t, a), b) - inner(a, casimir_apply(t, b))), 1e-10);
    }
  }
}

TEST(Casimir, ProjectionsReconstructAndDiagonalize) {
  std::mt19937 rng(4);
  const int n = 4;
  const auto t = principal_triple(n);
  const Mat s = random_hermitian(n, rng);
  Mat sum = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const Mat p = casimir_project(t, s, k);
    EXPECT_LT(maxabs(casimir_apply(t, p) - k * (k + 1.0) * p), 1e-10);
    sum += p;
  }
  EXPECT_LT(maxabs(sum - s), 1e-10);
}

TEST(IndicialRoots, Examples) {
  const std::vector<double> r2 = indicial_roots(2), r4 = indicial_roots(4);
  const std::vector<double> e2 = {-1, 2}, e4 = {-3, -2, -1, 2, 3, 4};
  ASSERT_EQ(r2.size(), e2.size());
  ASSERT_EQ(r4.size(), e4.size());
  for (size_t i = 0; i < e2.size(); ++i) EXPECT_NEAR(r2[i], e2[i], 1e-9);
  for (size_t i = 0; i < e4.size(); ++i) EXPECT_NEAR(r4[i], e4[i], 1e-9);
}

TEST(IndicialRoots, IntegerSetsForRanksTwoToEight) {
  for (int n = 2; n <= 8; ++n) {
    const auto r = indicial_roots(n);
    ASSERT_EQ(int(r.size()), 2 * (n - 1));
    for (int k = 1; k < n; ++k) {
      EXPECT_NEAR(r[n - 1 - k], -double(k), 1e-9);
      EXPECT_NEAR(r[n - 2 + k], double(k + 1), 1e-9);
    }
  }
}

TEST(GammaV, ZeroArgumentIsIdentity) {
  std::mt19937 rng(5);
  const Mat x = random_complex(3, rng);
  EXPECT_LT(maxabs(gamma_apply(Mat::Zero(3, 3), x) - x), 1e-15);
  EXPECT_LT(maxabs(v_apply(Mat::Zero(3, 3), x) - x), 1e-15);
}

TEST(GammaV, DiagonalExample) {
  const auto t = principal_triple(2);
  Mat s = Mat::Zero(2, 2);
  s(0, 0) = 1.0;
  s(1, 1) = -1.0;
  const double expect = (std::exp(2.0) - 1.0) / 2.0;
  EXPECT_NEAR(expect, 3.194528, 1e-6);
  EXPECT_LT(maxabs(gamma_apply(s, t.e_plus) - expect * t.e_plus), 1e-12);
}

TEST(GammaV, SmallArgumentSeriesBranchMatchesSpectralBranch) {
  std::mt19937 rng(6);
  const Mat x = random_complex(3, rng);
  const Mat s = random_hermitian(3, rng, 1.0);
  // the series branch is used below 1e-4; compare against the scalar formula in the eigenbasis
  const Mat sm = 5e-5 * s;
  const HermEig e = herm_eig(sm);
  Mat xt = e.U.adjoint() * x * e.U;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double l = e.w(i) - e.w(j);
      xt(i, j) *= l == 0.0 ? 1.0 : std::expm1(l) / l;
    }
  EXPECT_LT(maxabs(gamma_apply(sm, x) - e.U * xt * e.U.adjoint()), 1e-14);
}

TEST(GammaV, IdentitiesOnRandomHermitian) {
  std::mt19937 rng(7);
  for (int k = 0; k < 200; ++k) {
    const int n = 2 + k % 4;
    const Mat s = random_hermitian(n, rng, 2.0 * (k % 10 + 1) / 10.0);
    const auto [g, v] = gamma_v_defects(s, random_complex(n, rng));
    EXPECT_LT(g, 1e-10);
    EXPECT_LT(v, 1e-10);
  }
}

TEST(GammaV, RejectsNonHermitian) {
  std::mt19937 rng(8);
  Mat s = random_complex(2, rng);
  s(0, 1) += 1.0;
  EXPECT_THROW(gamma_apply(s, s), domain_error);
  EXPECT_THROW(v_apply(s, s), domain_error);
}

TEST(Tilt, PiOverTwelve) {
  const TiltParams p = tilt_params(std::numbers::pi / 12.0);
  EXPECT_NEAR(p.t, std::tan(std::numbers::pi / 8.0), 1e-15);
  EXPECT_NEAR(p.t, 0.4142136, 1e-7);
  EXPECT_NEAR(p.c_minus, -1.0, 1e-14);
  EXPECT_NEAR(p.c_plus, std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(p.w, 0.2679492, 1e-7);
}

TEST(Tilt, UntwistedLimit) {
  const TiltParams p = tilt_params(1e-9);
  EXPECT_NEAR(p.t, 1.0, 1e-6);
  EXPECT_NEAR(p.c_minus, 0.0, 1e-6);
  EXPECT_NEAR(p.c_plus, 1.0, 1e-6);
}

TEST(Tilt, TrigIdentitiesOnSampledAngles) {
  for (int k = 0; k < 20; ++k) {
    const double b = -0.5 + 1.0 * (k + 0.5) / 20.0;
    const TiltParams p = tilt_params(b);
    EXPECT_NEAR(p.c_minus, -std::tan(3.0 * b), 1e-12) << b;
    EXPECT_NEAR(p.c_plus, 1.0 / std::cos(3.0 * b), 1e-12) << b;
  }
}

TEST(Tilt, DomainErrors) {
  EXPECT_THROW(tilt_params(0.0), domain_error);
  EXPECT_THROW(tilt_params(std::numbers::pi / 6.0), domain_error);
  EXPECT_THROW(tilt_params(-0.6), domain_error);
}

TEST(TwistGauge, Examples) {
  const Mat g = twist_gauge(2, cplx(4.0));
  EXPECT_NEAR(std::abs(g(0, 0) - 2.0), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(g(1, 1) - 0.5), 0.0, 1e-14);
  EXPECT_LT(maxabs(twist_gauge(3, cplx(1.0)) - Mat::Identity(3, 3)), 1e-15);
  EXPECT_THROW(twist_gauge(2, cplx(0.0)), domain_error);
}

TEST(MatrixFunctions, ExpLogSqrtRoundTrip) {
  std::mt19937 rng(9);
  for (int n = 2; n <= 5; ++n) {
    const Mat s = random_hermitian(n, rng, 1.5);
    const Mat h = exp_herm(s);
    EXPECT_LT(maxabs(log_pos(h) - s), 1e-12);
    const Mat r = sqrt_pos(h);
    EXPECT_LT(maxabs(r * r - h), 1e-11);
    const Mat x = random_complex(n, rng);
    EXPECT_LT(maxabs(Ad_exp(s, x) - h * x * h.inverse()), 1e-10);
  }
  Mat neg = -Mat::Identity(2, 2);
  EXPECT_THROW(log_pos(neg), decomposition_error);
}
