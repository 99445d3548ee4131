#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "types.hpp"

namespace nahm {

/// Principal sl2 triple inside sl(n).
struct PrincipalTriple {
  int n = 0;
  Mat e_plus, e_minus, e_zero;
};

inline PrincipalTriple principal_triple(int n) {
  if (n < 2) throw invalid_rank("principal_triple: rank must be at least 2");
  PrincipalTriple t;
  t.n = n;
  t.e_plus = Mat::Zero(n, n);
  t.e_zero = Mat::Zero(n, n);
  for (int i = 1; i < n; ++i) t.e_plus(i - 1, i) = std::sqrt(double(i * (n - i)));
  for (int i = 0; i < n; ++i) t.e_zero(i, i) = double(n - 1 - 2 * i);
  t.e_minus = t.e_plus.transpose();
  return t;
}

inline Mat casimir_apply(const PrincipalTriple& t, const Mat& s) {
  if (s.rows() != t.n || s.cols() != t.n) throw dimension_error("casimir_apply: dimension mismatch");
  const Mat& ep = t.e_plus;
  const Mat& em = t.e_minus;
  const Mat& e0 = t.e_zero;
  return 0.5 * (comm(ep, comm(em, s)) + comm(em, comm(ep, s))) + 0.25 * comm(e0, comm(e0, s));
}

inline Mat traceless_part(const Mat& a) {
  return a - (a.trace() / double(a.rows())) * Mat::Identity(a.rows(), a.cols());
}

/// Orthonormal basis of real traceless n x n matrices for <a,b> = Re tr(a b^dagger).
inline std::vector<Mat> real_traceless_basis(int n) {
  std::vector<Mat> b;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) {
        Mat m = Mat::Zero(n, n);
        m(i, j) = 1.0;
        b.push_back(m);
      }
  for (int k = 1; k < n; ++k) {
    Mat m = Mat::Zero(n, n);
    for (int j = 0; j < k; ++j) m(j, j) = 1.0;
    m(k, k) = -double(k);
    b.push_back(m / std::sqrt(double(k * (k + 1))));
  }
  return b;
}

/// Orthonormal basis of traceless Hermitian matrices (generalized Gell-Mann).
inline std::vector<Mat> hermitian_basis(int n) {
  std::vector<Mat> b;
  const double r = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Mat a = Mat::Zero(n, n), c = Mat::Zero(n, n);
      a(i, j) = a(j, i) = r;
      c(i, j) = I * r;
      c(j, i) = -I * r;
      b.push_back(a);
      b.push_back(c);
    }
  for (int k = 1; k < n; ++k) {
    Mat m = Mat::Zero(n, n);
    for (int j = 0; j < k; ++j) m(j, j) = 1.0;
    m(k, k) = -double(k);
    b.push_back(m / std::sqrt(double(k * (k + 1))));
  }
  return b;
}

/// Matrix of the Casimir on traceless matrices in the real orthonormal basis, symmetrized.
inline RMat casimir_matrix(int n) {
  const auto t = principal_triple(n);
  const auto b = real_traceless_basis(n);
  const int d = int(b.size());
  RMat m(d, d);
  for (int j = 0; j < d; ++j) {
    Mat img = casimir_apply(t, b[j]);
    for (int i = 0; i < d; ++i) m(i, j) = (b[i].conjugate().cwiseProduct(img)).sum().real();
  }
  return 0.5 * (m + m.transpose());
}

inline std::vector<double> casimir_spectrum(int n) {
  if (n < 2) throw invalid_rank("casimir_spectrum: rank must be at least 2");
  Eigen::SelfAdjointEigenSolver<RMat> es(casimir_matrix(n));
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Projection of a traceless matrix onto the Casimir eigenspace k(k+1), 1 <= k <= n-1.
inline Mat casimir_project(const PrincipalTriple& t, const Mat& s, int k) {
  if (k < 1 || k >= t.n) throw domain_error("casimir_project: component out of range");
  const double lk = k * (k + 1.0);
  Mat r = s;
  for (int kp = 1; kp < t.n; ++kp) {
    if (kp == k) continue;
    const double l = kp * (kp + 1.0);
    r = (casimir_apply(t, r) - l * r) / (lk - l);
  }
  return r;
}

inline std::vector<double> indicial_roots(int n) {
  if (n < 2) throw invalid_rank("indicial_roots: rank must be at least 2");
  std::vector<double> roots;
  for (double ev : casimir_spectrum(n)) {
    const double disc = std::sqrt(1.0 + 4.0 * ev);
    for (double r : {0.5 * (1.0 - disc), 0.5 * (1.0 + disc)}) {
      bool seen = false;
      for (double x : roots)
        if (std::abs(x - r) < 1e-7) seen = true;
      if (!seen) roots.push_back(r);
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

struct HermEig {
  RVec w;
  Mat U;
};

inline HermEig herm_eig(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> es(herm_part(s));
  return {es.eigenvalues(), es.eigenvectors()};
}

inline void require_hermitian(const Mat& s, const char* what) {
  require_square(s, what);
  if (!is_hermitian(s)) throw domain_error(std::string(what) + ": argument is not Hermitian");
}

/// Entire function of ad_s, given both as a scalar map and by its Taylor coefficients.
struct AdFunction {
  std::function<double(double)> f;
  std::vector<double> taylor;
};

inline AdFunction gamma_function() {
  AdFunction a;
  a.f = [](double l) { return std::abs(l) < 1e-300 ? 1.0 : std::expm1(l) / l; };
  double fact = 1.0;
  for (int k = 0; k < 10; ++k) {
    fact *= (k + 1);
    a.taylor.push_back(1.0 / fact);
  }
  return a;
}

inline AdFunction v_function() {
  AdFunction a;
  a.f = [](double l) { return std::abs(l) < 1e-300 ? 1.0 : std::sqrt(-std::expm1(-l) / l); };
  std::vector<double> g;
  double fact = 1.0;
  for (int k = 0; k < 10; ++k) {
    fact *= (k + 1);
    g.push_back(((k % 2) ? -1.0 : 1.0) / fact);
  }
  std::vector<double> r(g.size(), 0.0);
  r[0] = 1.0;
  for (size_t k = 1; k < g.size(); ++k) {
    double acc = g[k];
    for (size_t j = 1; j < k; ++j) acc -= r[j] * r[k - j];
    r[k] = acc / 2.0;
  }
  a.taylor = r;
  return a;
}

/// Applies f(ad_s) to x for Hermitian s.
inline Mat ad_function_apply(const AdFunction& fn, const Mat& s, const Mat& x) {
  require_hermitian(s, "ad_function_apply");
  require_same(s, x, "ad_function_apply");
  if (maxabs(s) < 1e-4) {
    Mat term = x, acc = fn.taylor[0] * x;
    for (size_t k = 1; k < fn.taylor.size(); ++k) {
      term = comm(s, term);
      acc += fn.taylor[k] * term;
    }
    return acc;
  }
  const HermEig e = herm_eig(s);
  Mat xt = e.U.adjoint() * x * e.U;
  for (int i = 0; i < xt.rows(); ++i)
    for (int j = 0; j < xt.cols(); ++j) xt(i, j) *= fn.f(e.w(i) - e.w(j));
  return e.U * xt * e.U.adjoint();
}

inline Mat gamma_apply(const Mat& s, const Mat& x) {
  static const AdFunction g = gamma_function();
  return ad_function_apply(g, s, x);
}

inline Mat v_apply(const Mat& s, const Mat& x) {
  static const AdFunction v = v_function();
  return ad_function_apply(v, s, x);
}

template <class F>
Mat herm_function(const Mat& s, F&& f) {
  const HermEig e = herm_eig(s);
  RVec w = e.w.unaryExpr(f);
  return e.U * w.cast<cplx>().asDiagonal() * e.U.adjoint();
}

inline Mat exp_herm(const Mat& s) {
  require_hermitian(s, "exp_herm");
  return herm_function(s, [](double x) { return std::exp(x); });
}

/// Logarithm of a positive definite Hermitian matrix.
inline Mat log_pos(const Mat& h) {
  require_hermitian(h, "log_pos");
  const HermEig e = herm_eig(h);
  if (e.w.minCoeff() <= 0.0) throw decomposition_error("log_pos: matrix not positive definite");
  return e.U * e.w.array().log().matrix().cast<cplx>().asDiagonal() * e.U.adjoint();
}

inline Mat sqrt_pos(const Mat& h) {
  require_hermitian(h, "sqrt_pos");
  const HermEig e = herm_eig(h);
  if (e.w.minCoeff() <= 0.0) throw decomposition_error("sqrt_pos: matrix not positive definite");
  return e.U * e.w.array().sqrt().matrix().cast<cplx>().asDiagonal() * e.U.adjoint();
}

/// Ad(e^s) x = e^s x e^{-s} for Hermitian s.
inline Mat Ad_exp(const Mat& s, const Mat& x) {
  require_hermitian(s, "Ad_exp");
  const HermEig e = herm_eig(s);
  Mat xt = e.U.adjoint() * x * e.U;
  for (int i = 0; i < xt.rows(); ++i)
    for (int j = 0; j < xt.cols(); ++j) xt(i, j) *= std::exp(e.w(i) - e.w(j));
  return e.U * xt * e.U.adjoint();
}

struct TiltParams {
  double beta = 0.0, t = 1.0, w = 0.0, c_minus = 0.0, c_plus = 1.0;
  double sin() const { return std::sin(beta); }
  double cos() const { return std::cos(beta); }
};

inline TiltParams tilt_params(double beta) {
  if (!(std::abs(beta) < std::numbers::pi / 6.0)) throw domain_error("tilt_params: beta outside (-pi/6, pi/6)");
  if (beta == 0.0) throw domain_error("tilt_params: beta = 0 is excluded");
  TiltParams p;
  p.beta = beta;
  p.t = std::tan(std::numbers::pi / 4.0 - 1.5 * beta);
  p.w = std::tan(beta);
  p.c_minus = 0.5 * (p.t - 1.0 / p.t);
  p.c_plus = 0.5 * (p.t + 1.0 / p.t);
  return p;
}

inline Mat twist_gauge(int n, cplx w) {
  if (w == cplx(0.0)) throw domain_error("twist_gauge: w = 0");
  if (n < 2) throw invalid_rank("twist_gauge: rank must be at least 2");
  Mat g = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) g(i, i) = std::pow(w, 0.5 * (n - 1) - i);
  return g;
}

/// Real coordinates of a traceless Hermitian matrix in hermitian_basis(n).
inline RVec herm_coords(const Mat& s, const std::vector<Mat>& basis) {
  RVec c(basis.size());
  for (size_t a = 0; a < basis.size(); ++a) c(a) = (basis[a].conjugate().cwiseProduct(s)).sum().real();
  return c;
}

inline Mat herm_from_coords(const RVec& c, const std::vector<Mat>& basis, int offset = 0) {
  Mat s = Mat::Zero(basis[0].rows(), basis[0].cols());
  for (size_t a = 0; a < basis.size(); ++a) s += c(offset + a) * basis[a];
  return s;
}

}  // namespace nahm
